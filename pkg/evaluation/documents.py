"""Locating prediction and ground-truth documents and writing scores."""
import csv
import logging
from pathlib import Path

from pipeline.documents import read_persons
from .models import GroundTruth

logger = logging.getLogger(__name__)

DOCUMENT_NAMES = ('parse.json', 'gt.json')


def _document_in(directory):
    for name in DOCUMENT_NAMES:
        if (directory / name).is_file():
            return directory / name
    return None


def find_documents(path):
    """{image name: document path}. A file or a directory holding one is a single image;
    otherwise every sub-directory holding one is an image named after it.
    """
    path = Path(path)
    if path.is_file():
        return {path.parent.name: path}
    if not path.is_dir():
        raise FileNotFoundError(f"{path} does not exist")
    single = _document_in(path)
    if single is not None:
        return {path.name: single}
    found = {}
    for child in sorted(p for p in path.iterdir() if p.is_dir()):
        document = _document_in(child)
        if document is not None:
            found[child.name] = document
    return found


def load_ground_truth(name, path):
    persons, width, height = read_persons(path)
    return GroundTruth(name=name, width=width, height=height, persons=persons)


def pair_documents(pred, gt):
    """[(name, prediction persons, GroundTruth)] for the names present on both sides."""
    predictions, truths = find_documents(pred), find_documents(gt)
    if len(predictions) == 1 and len(truths) == 1:
        # a single pair matches whatever the directories are called
        (name, pred_path), (_, gt_path) = next(iter(predictions.items())), next(iter(truths.items()))
        return [(name, read_persons(pred_path)[0], load_ground_truth(name, gt_path))]
    for name in sorted(set(predictions) ^ set(truths)):
        logger.warning("%s has no counterpart and is skipped", name)
    return [(name, read_persons(predictions[name])[0], load_ground_truth(name, truths[name]))
            for name in sorted(set(predictions) & set(truths))]


def write_curve(path, report):
    with open(path, 'w', newline='') as stream:
        writer = csv.writer(stream)
        writer.writerow(['threshold', 'forward', 'backward'])
        for threshold, forward, backward in report.curve:
            writer.writerow([f"{threshold:.2f}", f"{forward:.6f}", f"{backward:.6f}"])
