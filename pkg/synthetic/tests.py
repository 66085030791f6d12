import io
import os
import tempfile

import numpy as np
from scipy import ndimage
from django.core.management import call_command
from django.test import SimpleTestCase

from assembly.models import AssemblyProblem
from detangle.commands import read_json
from pipeline.documents import read_persons
from rasters.formats import read_label_raster, read_masks
from semantics.heads import detect_heads
from semantics.models import Part, BODY_PARTS, ReferenceAnthropometry
from semantics.stack import load_image, load_stack
from synthetic.models import BACKGROUND_COLOR
from synthetic.render import make_proposals, place_figures, render_fixture

REFERENCE_HEIGHT = 48.0


class RenderTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.fixture = render_fixture(11, people=2, overlap=0.3, reference_height=REFERENCE_HEIGHT)

    def test_same_seed_same_scene(self):
        again = render_fixture(11, people=2, overlap=0.3, reference_height=REFERENCE_HEIGHT)
        np.testing.assert_array_equal(again.image, self.fixture.image)
        np.testing.assert_array_equal(again.stack.maps, self.fixture.stack.maps)
        np.testing.assert_array_equal(again.labels.labels, self.fixture.labels.labels)
        self.assertEqual([m.runs for m in again.proposals], [m.runs for m in self.fixture.proposals])

    def test_labels_agree_with_persons(self):
        labels = self.fixture.labels.labels
        for person in self.fixture.persons:
            for part in BODY_PARTS:
                np.testing.assert_array_equal(labels == person.index * len(BODY_PARTS) + part + 1,
                                              person.mask(part, self.fixture.shape))
        self.assertEqual(self.fixture.labels.legend[2 * len(BODY_PARTS) + Part.ARM + 1], (2, 'arm'))

    def test_persons_do_not_share_pixels(self):
        owners = sum(person.instance_mask.astype(int) for person in self.fixture.persons)
        self.assertLessEqual(owners.max(), 1)
        self.assertTrue(all(person.has(Part.HEAD) and person.has(Part.TORSO) for person in self.fixture.persons))

    def test_one_head_per_figure(self):
        heads = detect_heads(self.fixture.stack.maps[Part.HEAD], self.fixture.stack.factors)
        self.assertEqual(sorted(head.center for head in heads),
                         sorted(person.head.center for person in self.fixture.persons))
        for head in heads:
            person = next(p for p in self.fixture.persons if p.head.center == head.center)
            self.assertAlmostEqual(head.scale, person.head.scale, places=6)

    def test_proposals_cover_the_canvas(self):
        self.assertGreater(len(self.fixture.proposals), len(self.fixture.persons))
        for mask in self.fixture.proposals:
            self.assertEqual((mask.height, mask.width), self.fixture.shape)
            self.assertTrue(mask.bitmask.any())

    def test_proposals_follow_image_colours(self):
        image = np.full((10, 12, 3), BACKGROUND_COLOR, dtype=np.uint8)
        squares = [np.zeros((10, 12), dtype=bool) for _ in range(2)]
        squares[0][3:7, 2:6] = True
        squares[1][3:7, 6:10] = True
        image[squares[0]] = (200, 30, 30)
        image[squares[1]] = (30, 60, 200)
        for seed in range(5):
            proposals = [mask.bitmask for mask in make_proposals(image, np.random.default_rng(seed), boxes=0)]
            self.assertEqual(len(proposals), 2)
            for proposal in proposals:
                square = max(squares, key=lambda s: (proposal & s).sum())
                self.assertFalse((proposal & ~ndimage.binary_dilation(square)).any())
                self.assertFalse((ndimage.binary_erosion(square) & ~proposal).any())

    def test_overlap_brings_figures_closer(self):
        apart = render_fixture(5, people=2, reference_height=REFERENCE_HEIGHT)
        closer = render_fixture(5, people=2, overlap=0.5, reference_height=REFERENCE_HEIGHT)
        self.assertLess(closer.shape[1], apart.shape[1])

    def test_fixed_scale(self):
        fixture = render_fixture(3, people=3, reference_height=REFERENCE_HEIGHT, vary_scale=False)
        self.assertEqual({figure.scale for figure in fixture.figures}, {1.0})


class PlacementTestCase(SimpleTestCase):
    def setUp(self):
        self.anthro = ReferenceAnthropometry().scaled(REFERENCE_HEIGHT / 150.0)

    def test_overlap_is_clamped(self):
        with self.assertLogs('synthetic', level='WARNING'):
            place_figures(np.random.default_rng(0), 2, 0.95, self.anthro)

    def test_needs_a_person(self):
        with self.assertRaises(ValueError):
            place_figures(np.random.default_rng(0), 0, 0.0, self.anthro)

    def test_canvas_holds_every_figure(self):
        figures, (height, width) = place_figures(np.random.default_rng(1), 4, 0.2, self.anthro)
        for figure in figures:
            self.assertTrue(0 < figure.x < width)
            self.assertTrue(0 <= figure.top < height)


class GenCommandTestCase(SimpleTestCase):
    def test_writes_a_scene(self):
        with tempfile.TemporaryDirectory() as out:
            call_command('gen', seed=4, people=2, reference_height=REFERENCE_HEIGHT, problem=4, out=out,
                         stdout=io.StringIO())
            fixture = render_fixture(4, people=2, reference_height=REFERENCE_HEIGHT)

            stack = load_stack(os.path.join(out, 'stack'))
            np.testing.assert_allclose(stack.maps, fixture.stack.maps)
            np.testing.assert_array_equal(load_image(os.path.join(out, 'stack'), stack.shape), fixture.image)
            labels = read_label_raster(os.path.join(out, 'labels'))
            np.testing.assert_array_equal(labels.labels, fixture.labels.labels)
            self.assertEqual(len(read_masks(os.path.join(out, 'proposals.masks.json'))), len(fixture.proposals))
            persons, width, height = read_persons(os.path.join(out, 'gt.json'))
            self.assertEqual((height, width), fixture.shape)
            self.assertEqual([p.head.center for p in persons], [p.head.center for p in fixture.persons])
            anthro = ReferenceAnthropometry.from_dict(read_json(os.path.join(out, 'anthro.json')))
            self.assertAlmostEqual(anthro.reference_height, REFERENCE_HEIGHT)
            problem = AssemblyProblem.from_dict(read_json(os.path.join(out, 'problem.json')))
            self.assertEqual(problem.n_regions, 4)
