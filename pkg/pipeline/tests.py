import io
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.test import SimpleTestCase

from assembly.models import Params
from detangle.commands import read_json
from evaluation.scores import backward_score, forward_score
from rasters.formats import read_label_raster, read_masks
from semantics.models import Part, BODY_PARTS, HeadCandidate, SemanticMap, SoftMapStack
from synthetic.render import render_fixture
from synthetic.writer import write_fixture
from pipeline.baseline import connected_components_baseline
from pipeline.documents import read_persons
from pipeline.models import PersonParse, label_id
from pipeline.rendering import paint_labels
from pipeline.stages import Pipeline, prepare_scene, run_pipeline

REFERENCE_HEIGHT = 48.0


def _semantic(rows):
    return SemanticMap(labels=np.array(rows, dtype=np.int8))


def _parse(fixture):
    return run_pipeline(fixture.stack, fixture.proposals, Params.from_settings(), fixture.anthro,
                        image=fixture.image)


class BaselineTestCase(SimpleTestCase):
    B = Part.BACKGROUND

    def test_disjoint_silhouettes(self):
        persons = connected_components_baseline(_semantic([
            [Part.HEAD, self.B, Part.HEAD],
            [Part.TORSO, self.B, Part.TORSO],
            [Part.LEG, self.B, Part.LEG],
        ]))
        self.assertEqual(len(persons), 2)
        self.assertEqual([p.index for p in persons], [1, 2])
        self.assertEqual(set(persons[0].parts), {Part.HEAD, Part.TORSO, Part.LEG})

    def test_touching_silhouettes_merge(self):
        persons = connected_components_baseline(_semantic([
            [Part.HEAD, self.B, Part.HEAD],
            [Part.TORSO, Part.ARM, Part.TORSO],
        ]))
        self.assertEqual(len(persons), 1)
        self.assertEqual(persons[0].area, 5)

    def test_empty_map(self):
        self.assertEqual(connected_components_baseline(_semantic([[self.B, self.B]])), [])


class PaintLabelsTestCase(SimpleTestCase):
    def setUp(self):
        self.semantic = _semantic([[Part.TORSO, Part.ARM, Part.BACKGROUND, Part.LEG]])
        self.first = PersonParse(index=1, parts={Part.TORSO: [[True, False, False, False]],
                                                 Part.ARM: [[False, True, False, False]]})
        self.second = PersonParse(index=2, parts={Part.ARM: [[True, False, False, False]]})
        self.soft = np.zeros((len(Part), 1, 4))

    def test_most_probable_part_wins_overlap(self):
        self.soft[Part.TORSO, 0, 0], self.soft[Part.ARM, 0, 0] = 0.3, 0.6
        raster = paint_labels([self.first, self.second], self.semantic, self.soft)
        self.assertEqual(raster.labels.tolist(), [[label_id(2, Part.ARM), label_id(1, Part.ARM), 0, Part.LEG + 1]])
        self.assertEqual(raster.legend[label_id(2, Part.ARM)], (2, 'arm'))

    def test_ties_go_to_the_first_person(self):
        raster = paint_labels([self.first, self.second], self.semantic, self.soft)
        self.assertEqual(raster.labels[0, 0], label_id(1, Part.TORSO))

    def test_no_persons(self):
        raster = paint_labels([], self.semantic, self.soft)
        self.assertEqual(raster.labels.tolist(), [[Part.TORSO + 1, Part.ARM + 1, 0, Part.LEG + 1]])


class PersonParseTestCase(SimpleTestCase):
    def test_empty_parts_are_dropped(self):
        person = PersonParse(index=1, parts={Part.ARM: np.zeros((2, 2), dtype=bool)})
        self.assertFalse(person.has(Part.ARM))
        self.assertIsNone(person.shape)
        self.assertEqual(person.area, 0)

    def test_document(self):
        torso = np.zeros((3, 4), dtype=bool)
        torso[1:, 1:3] = True
        person = PersonParse(index=3, parts={Part.TORSO: torso, Part.HEAD: ~torso}, regions={Part.TORSO: (5, 6)})
        again = PersonParse.from_dict(person.to_dict(), 4, 3)
        self.assertEqual(again.index, 3)
        np.testing.assert_array_equal(again.mask(Part.TORSO), torso)
        np.testing.assert_array_equal(again.instance_mask, np.ones((3, 4), dtype=bool))
        self.assertEqual(again.regions, {Part.TORSO: (5, 6)})

    def test_background_is_not_a_person_part(self):
        with self.assertRaises(ValueError):
            PersonParse.from_dict({'index': 1, 'parts': {'background': [4]}}, 2, 2)


class SinglePersonTestCase(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.fixture = render_fixture(21, people=1, reference_height=REFERENCE_HEIGHT)
        cls.persons, cls.raster = _parse(cls.fixture)

    def test_one_person_with_every_part(self):
        self.assertEqual(len(self.persons), 1)
        self.assertEqual(set(self.persons[0].parts), set(BODY_PARTS))
        self.assertGreater(forward_score(self.persons, self.fixture.persons), 0.5)

    def test_label_raster_matches_persons(self):
        owners = self.raster.labels.astype(int) - 1
        person_one = (owners >= len(BODY_PARTS)) & (owners < 2 * len(BODY_PARTS))
        self.assertTrue(person_one.any())
        self.assertFalse((person_one & ~self.persons[0].instance_mask).any())

    def test_runs_are_repeatable(self):
        persons, raster = _parse(self.fixture)
        np.testing.assert_array_equal(raster.labels, self.raster.labels)
        self.assertEqual([p.to_dict() for p in persons], [p.to_dict() for p in self.persons])

    def test_no_heads_leaves_everything_unattributed(self):
        maps = np.array(self.fixture.stack.maps)
        maps[Part.HEAD] = 0
        stack = SoftMapStack(width=self.fixture.stack.width, height=self.fixture.stack.height,
                             factors=self.fixture.stack.factors, maps=maps)
        scene = prepare_scene(stack, self.fixture.proposals, self.fixture.anthro, self.fixture.image)
        with self.assertLogs('pipeline', level='WARNING'):
            persons, raster = Pipeline(scene, Params.from_settings(), self.fixture.anthro).run()
        self.assertEqual(persons, [])
        self.assertLessEqual(int(raster.labels.max()), len(BODY_PARTS))


class TangledPeopleTestCase(SimpleTestCase):
    SEEDS = range(31, 51)

    def test_assembly_beats_connected_components(self):
        ours, baseline = [], []
        for seed in self.SEEDS:
            fixture = render_fixture(seed, people=2, overlap=0.3, reference_height=REFERENCE_HEIGHT)
            persons, _ = _parse(fixture)
            scene = prepare_scene(fixture.stack, fixture.proposals, fixture.anthro, fixture.image)
            ours.append(forward_score(persons, fixture.persons))
            baseline.append(forward_score(connected_components_baseline(scene.semantic), fixture.persons))
        self.assertGreaterEqual(np.mean(ours), np.mean(baseline) + 0.15)

    def test_baseline_is_exact_on_a_lone_person(self):
        for seed in (21, 22, 23):
            fixture = render_fixture(seed, people=1, reference_height=REFERENCE_HEIGHT)
            persons = connected_components_baseline(SemanticMap.from_label_raster(fixture.labels))
            self.assertAlmostEqual(forward_score(persons, fixture.persons), 1.0)
            self.assertAlmostEqual(backward_score(persons, fixture.persons), 1.0)


class ParseCommandTestCase(SimpleTestCase):
    def test_writes_parse_outputs(self):
        fixture = render_fixture(41, people=1, reference_height=REFERENCE_HEIGHT)
        with tempfile.TemporaryDirectory() as root:
            write_fixture(fixture, root)
            out = os.path.join(root, 'out')
            call_command('parse', stack=os.path.join(root, 'stack'),
                         proposals=os.path.join(root, 'proposals.masks.json'),
                         anthro=os.path.join(root, 'anthro.json'), out=out, threads=1, stdout=io.StringIO())

            persons, width, height = read_persons(os.path.join(out, 'parse.json'))
            self.assertEqual((height, width), fixture.shape)
            self.assertEqual(len(persons), 1)
            self.assertIn('torso', read_json(os.path.join(out, 'parse.json'))['solutions'])
            raster = read_label_raster(os.path.join(out, 'labels'))
            self.assertEqual(raster.labels.shape, fixture.shape)
            self.assertEqual(list(read_masks(os.path.join(out, 'persons.masks.json'))), [1])
            pool = read_json(os.path.join(out, 'pool.json'))
            self.assertEqual(len(pool['heads']), 1)
            self.assertEqual(set(read_json(os.path.join(out, 'features.json'))), {'torso', 'arm', 'leg'})

            heads = [HeadCandidate.from_dict(entry) for entry in read_json(os.path.join(out, 'heads.json'))]
            self.assertEqual(len(heads), 1)
            self.assertEqual([head.to_dict() for head in heads], read_json(os.path.join(out, 'heads.json')))
            self.assertTrue(0 <= heads[0].x < fixture.shape[1] and 0 <= heads[0].y < fixture.shape[0])
            semantic = SemanticMap.from_label_raster(read_label_raster(os.path.join(out, 'semantic')))
            self.assertEqual(semantic.shape, fixture.shape)
            self.assertGreater(semantic.area(Part.TORSO), 0)
