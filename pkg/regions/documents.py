"""JSON views of a region pool and its features."""
import json


def pool_document(regions, width, height):
    return {
        'width': width,
        'height': height,
        'regions': [region.to_dict() for region in regions],
    }


def _sparse(matrix, threshold, regions):
    pairs = []
    for m in range(len(regions)):
        for n in range(m + 1, len(regions)):
            if matrix[m, n] > threshold:
                pairs.append([regions[m].id, regions[n].id, round(float(matrix[m, n]), 9)])
    return pairs


def features_document(regions, tables, exclusions, tau, epsilon):
    """Dense q/r/d per (region, instance) and the pairwise lists above `tau` and `epsilon`."""
    return {
        'regions': [region.id for region in regions],
        'q': tables.q.round(9).tolist(),
        'r': tables.r.round(9).tolist(),
        'd': tables.d.round(9).tolist(),
        'iou': _sparse(exclusions.iou, tau, regions),
        'color': _sparse(exclusions.color, epsilon, regions),
    }


def write_document(path, document):
    with open(path, 'w') as stream:
        json.dump(document, stream)
