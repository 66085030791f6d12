import csv
import io
import json
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from detangle.commands import write_json
from pipeline.documents import persons_document
from pipeline.models import PersonParse
from rasters.rle import bitmask_iou
from semantics.models import Part, HeadCandidate, BODY_PARTS
from evaluation.proxemics import FEATURE_NAMES, MISSING_DISTANCE, proxemics_features
from evaluation.report import generate_report
from evaluation.scores import backward_score, forward_score, iou_curve, match, score_report

SHAPE = (24, 24)


def _person(index, shape=SHAPE, candidate=None, **parts):
    masks = {}
    for name, (rows, cols) in parts.items():
        mask = np.zeros(shape, dtype=bool)
        mask[rows, cols] = True
        masks[Part.parse(name)] = mask
    return PersonParse(index=index, parts=masks, head=candidate)


def _random_persons(rng, count, shape=SHAPE):
    persons = []
    for index in range(1, count + 1):
        parts = {}
        for part in BODY_PARTS:
            if rng.random() < 0.8:
                y, x = rng.integers(0, shape[0] - 4), rng.integers(0, shape[1] - 4)
                h, w = rng.integers(2, 8, size=2)
                parts[part.label] = (slice(y, y + h), slice(x, x + w))
        if not parts:
            parts['torso'] = (slice(0, 3), slice(0, 3))
        persons.append(_person(index, shape, **parts))
    return persons


def _brute_force_best(sources, targets):
    best = []
    for source in sources:
        best.append(max((bitmask_iou(source.instance_mask, target.instance_mask) for target in targets), default=0.0))
    return best


class ScoreTestCase(SimpleTestCase):
    def setUp(self):
        self.alice = _person(1, head=(slice(0, 4), slice(0, 4)), torso=(slice(4, 12), slice(0, 6)))
        self.bob = _person(2, torso=(slice(10, 20), slice(12, 20)), arm=(slice(10, 12), slice(20, 24)))

    def test_perfect_prediction(self):
        gt = [self.alice, self.bob]
        self.assertEqual(forward_score(gt, gt), 1.0)
        self.assertEqual(backward_score(gt, gt), 1.0)
        report = score_report(match(gt, gt))
        self.assertEqual(report.part_forward, 1.0)
        self.assertEqual(report.per_part[Part.TORSO], (1.0, 1.0))

    def test_no_predictions(self):
        self.assertEqual(forward_score([], [self.alice]), 0.0)
        self.assertEqual(backward_score([], [self.alice]), 0.0)
        self.assertEqual(backward_score([self.alice], []), 0.0)

    def test_perfect_and_spurious_prediction(self):
        spurious = _person(3, torso=(slice(14, 22), slice(14, 22)))
        gt, pred = [self.alice, self.bob], [self.alice, spurious]
        overlap = bitmask_iou(self.bob.instance_mask, spurious.instance_mask)
        self.assertAlmostEqual(forward_score(pred, gt), (1 + overlap) / 2)
        self.assertAlmostEqual(backward_score(pred, gt), (1 + overlap) / 2)

    def test_random_sets_match_brute_force(self):
        rng = np.random.default_rng(50)
        for _ in range(100):
            gt, pred = _random_persons(rng, rng.integers(0, 4)), _random_persons(rng, rng.integers(0, 4))
            matches = match(pred, gt)
            np.testing.assert_allclose(matches.forward, _brute_force_best(gt, pred))
            np.testing.assert_allclose(matches.backward, _brute_force_best(pred, gt))

    def test_forward_and_backward_are_dual(self):
        rng = np.random.default_rng(51)
        for _ in range(100):
            gt, pred = _random_persons(rng, rng.integers(1, 4)), _random_persons(rng, rng.integers(1, 4))
            self.assertAlmostEqual(forward_score(pred, gt), backward_score(gt, pred))

    def test_order_does_not_matter(self):
        rng = np.random.default_rng(52)
        gt, pred = _random_persons(rng, 3), _random_persons(rng, 3)
        self.assertAlmostEqual(forward_score(pred, gt), forward_score(pred[::-1], gt[::-1]))
        self.assertAlmostEqual(backward_score(pred, gt), backward_score(pred[::-1], gt[::-1]))

    def test_scores_stay_in_unit_interval(self):
        rng = np.random.default_rng(53)
        for _ in range(50):
            report = score_report(match(_random_persons(rng, 3), _random_persons(rng, 2)))
            for value in (report.forward, report.backward, report.part_forward, report.part_backward):
                self.assertTrue(0.0 <= value <= 1.0)


class CurveTestCase(SimpleTestCase):
    def test_perfect_predictions(self):
        gt = _random_persons(np.random.default_rng(54), 3)
        curve = iou_curve(gt, gt, [0.0, 0.5, 0.99, 1.0])
        self.assertEqual([point[1] for point in curve], [1.0, 1.0, 1.0, 0.0])

    def test_matches_direct_counting_and_never_increases(self):
        rng = np.random.default_rng(55)
        thresholds = np.linspace(0, 1, 11)
        for _ in range(50):
            gt, pred = _random_persons(rng, 4), _random_persons(rng, 3)
            curve = iou_curve(pred, gt, thresholds)
            forward = _brute_force_best(gt, pred)
            for threshold, fraction, _ in curve:
                self.assertAlmostEqual(fraction, sum(iou > threshold for iou in forward) / len(forward))
            fractions = [point[1] for point in curve]
            self.assertEqual(fractions, sorted(fractions, reverse=True))

    def test_thresholds_must_ascend(self):
        with self.assertRaises(ValueError):
            iou_curve([], [], [0.5, 0.1])


class ProxemicsTestCase(SimpleTestCase):
    def _pixel_person(self, index, x, y, scale=1.0, shape=(40, 200)):
        parts = {name: (slice(y + k, y + k + 1), slice(x, x + 1)) for k, name in enumerate(('head', 'torso', 'arm'))}
        return _person(index, shape, HeadCandidate(x=x, y=y, scale=scale, peak_prob=1.0), **parts)

    def test_feature_vector_length(self):
        features = proxemics_features(self._pixel_person(1, 5, 5), self._pixel_person(2, 20, 5))
        self.assertEqual(len(features), 21)
        self.assertEqual(len(FEATURE_NAMES), 21)

    def test_identical_persons(self):
        features = proxemics_features(self._pixel_person(1, 5, 5), self._pixel_person(2, 5, 5))
        self.assertTrue(all(features[FEATURE_NAMES.index(f"min_{p.label}_{p.label}")] == 0
                            for p in (Part.HEAD, Part.TORSO, Part.ARM)))
        self.assertEqual(list(features[-3:]), [0.0, 0.0, 0.0])

    def test_translation_by_one_reference_height(self):
        features = proxemics_features(self._pixel_person(1, 10, 5), self._pixel_person(2, 160, 5))
        self.assertAlmostEqual(features[FEATURE_NAMES.index('head_dx')], 1.0)
        self.assertAlmostEqual(features[FEATURE_NAMES.index('min_head_head')], 1.0)
        self.assertAlmostEqual(features[FEATURE_NAMES.index('head_dy')], 0.0)

    def test_missing_part_uses_sentinel(self):
        first = self._pixel_person(1, 5, 5)
        second = _person(2, (40, 200), HeadCandidate(x=30, y=5, scale=1.0, peak_prob=1.0),
                         head=(slice(5, 6), slice(30, 31)))
        features = proxemics_features(first, second)
        self.assertEqual(features[FEATURE_NAMES.index('min_head_arm')], MISSING_DISTANCE)
        self.assertLess(features[FEATURE_NAMES.index('min_head_head')], MISSING_DISTANCE)

    def test_head_is_required(self):
        with self.assertRaises(ValueError):
            proxemics_features(_person(1, torso=(slice(0, 2), slice(0, 2))), self._pixel_person(2, 5, 5))


class ReportTestCase(SimpleTestCase):
    def test_pdf_document(self):
        gt = _random_persons(np.random.default_rng(56), 2)
        buffer = io.BytesIO()
        generate_report(buffer, score_report(match(gt, gt)))
        self.assertTrue(buffer.getvalue().startswith(b'%PDF'))


class EvalCommandTestCase(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = self.directory.name
        self.persons = _random_persons(np.random.default_rng(57), 2)

    def tearDown(self):
        self.directory.cleanup()

    def _write(self, *parts, persons=None):
        path = os.path.join(self.root, *parts)
        write_json(path, persons_document(self.persons if persons is None else persons, SHAPE[1], SHAPE[0]))
        return path

    def test_prediction_equal_to_ground_truth(self):
        gt = self._write('gt.json')
        out, curve, pdf = (os.path.join(self.root, name) for name in ('report.json', 'curve.csv', 'report.pdf'))
        call_command('eval', pred=gt, gt=gt, out=out, curve=curve, pdf=pdf, stdout=io.StringIO())
        with open(out) as stream:
            report = json.load(stream)
        self.assertEqual(report['instance'], {'forward': 1.0, 'backward': 1.0})
        with open(curve) as stream:
            rows = list(csv.reader(stream))
        self.assertEqual(rows[0], ['threshold', 'forward', 'backward'])
        self.assertTrue(os.path.getsize(pdf) > 0)

    def test_directories_pair_by_name(self):
        for name in ('a', 'b'):
            self._write('gt', name, 'gt.json')
            self._write('pred', name, 'parse.json', persons=[] if name == 'b' else None)
        self._write('pred', 'unmatched', 'parse.json')
        out = os.path.join(self.root, 'report.json')
        with self.assertLogs('evaluation', level='WARNING'):
            call_command('eval', pred=os.path.join(self.root, 'pred'), gt=os.path.join(self.root, 'gt'), out=out,
                         stdout=io.StringIO())
        with open(out) as stream:
            report = json.load(stream)
        self.assertEqual(report['images'], 2)
        self.assertAlmostEqual(report['instance']['forward'], 0.5)

    def test_missing_input(self):
        with self.assertRaises(CommandError):
            call_command('eval', pred=os.path.join(self.root, 'absent'), gt=os.path.join(self.root, 'absent'))
