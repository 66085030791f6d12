import io
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.test import SimpleTestCase

from assembly.builders import build_stage1, build_stage2, term_vector
from assembly.fixtures import SMALL_ANTHRO, random_problem, random_regions
from assembly.models import Params
from detangle.commands import read_json
from pipeline.models import PersonParse
from pipeline.stages import prepare_scene
from regions.features import pairwise_exclusions
from regions.models import CostFeatures, Instance
from regions.pool import make_region
from semantics.models import Part, HeadCandidate
from solver.baselines import exhaustive_oracle
from synthetic.render import render_fixture
from synthetic.writer import write_fixture
from learning.fitting import fit_params, learned_params, pick_tau, search_tau, tau_scores
from learning.models import AssemblyExample, LearningError, TERMS, TermVector, TrainingImage
from learning.samples import (
    assembly_iou, estimate_epsilon, match_heads, person_masks, positive_assignment, sample_negatives,
    training_images,
)

SHAPE = (16, 16)


def _image(name, positive, negatives):
    return TrainingImage(name=name, positive=TermVector(positive),
                         negatives=[TermVector(values) for values in negatives])


def _instance(index, x, y, peak_prob=0.9):
    mask = np.zeros(SHAPE, dtype=bool)
    mask[y, x] = True
    return Instance(index=index, head=HeadCandidate(x=x, y=y, scale=1.0, peak_prob=peak_prob), mask=mask)


def _box(rows, cols):
    mask = np.zeros(SHAPE, dtype=bool)
    mask[rows, cols] = True
    return mask


def _zero_features(n_regions, n_instances):
    shape = (n_regions, n_instances)
    return CostFeatures(q=np.zeros(shape), r=np.zeros(shape), d=np.zeros(shape))


def _torso_problem(regions, instances, params=None):
    cover = np.full(len(regions), 1.0 / len(regions))
    return build_stage1(regions, instances, _zero_features(len(regions), len(instances)), cover,
                        pairwise_exclusions(regions), SMALL_ANTHRO, params or Params())


def _random_example(seed, n_regions=5, n_instances=2):
    """A random torso problem with its optimum as the ground-truth assembly."""
    problem = random_problem(np.random.default_rng(seed), n_regions, n_instances)
    # random_problem draws its regions first
    regions = random_regions(np.random.default_rng(seed), n_regions, Part.TORSO)
    positive = exhaustive_oracle(problem).x
    return AssemblyExample(name=f"random-{seed}", problems={Part.TORSO: problem}, regions={Part.TORSO: regions},
                           positive={Part.TORSO: positive})


class TermVectorTestCase(SimpleTestCase):
    def test_energy_is_the_objective(self):
        rng = np.random.default_rng(60)
        for stage in (1, 2):
            problem = random_problem(rng, 4, 2, stage=stage)
            solution = exhaustive_oracle(problem)
            terms = TermVector(term_vector(problem, solution.x, solution.y, solution.e))
            self.assertAlmostEqual(terms.energy(problem.params.cost_weights), solution.objective, places=6)

    def test_values_must_be_finite(self):
        with self.assertRaises(ValueError):
            TermVector([0, 0, np.inf, 0, 0, 0, 0])
        with self.assertRaises(ValueError):
            TermVector([0, 0])

    def test_named_terms(self):
        self.assertEqual(list(TermVector(np.arange(7)).to_dict()), list(TERMS))


class MarginTestCase(SimpleTestCase):
    def test_one_separating_term_takes_all_weight(self):
        rng = np.random.default_rng(61)
        images = []
        for i in range(4):
            positive = rng.random(len(TERMS))
            deltas = rng.uniform(-1.0, 0.5, size=(5, len(TERMS)))
            deltas[:, 0] = 1.0
            images.append(_image(f"image-{i}", positive, positive + deltas))
        fit = fit_params(images)
        self.assertAlmostEqual(fit.weights[0], 1.0, places=6)
        self.assertTrue(fit.separable)
        np.testing.assert_allclose(fit.margins, 1.0, atol=1e-6)

    def test_weights_lie_on_the_simplex(self):
        rng = np.random.default_rng(62)
        images = [_image(f"image-{i}", rng.normal(size=7), rng.normal(size=(4, 7))) for i in range(5)]
        fit = fit_params(images)
        self.assertTrue(np.all(fit.weights >= 0))
        self.assertAlmostEqual(fit.weights.sum(), 1.0, delta=1e-9)

    def test_identical_negative_is_reported(self):
        same = np.arange(7, dtype=float)
        images = [_image('good', np.zeros(7), [np.ones(7)]), _image('tied', same, [same, same + 1])]
        with self.assertLogs('learning', level='WARNING') as logs:
            fit = fit_params(images)
        self.assertFalse(fit.separable)
        self.assertEqual(fit.worst, 'tied')
        self.assertLessEqual(fit.margins[1], 0.0)
        self.assertIn('tied', logs.output[0])

    def test_margins_beat_hand_set_weights(self):
        rng = np.random.default_rng(63)
        images = [_image(f"image-{i}", rng.normal(size=7), rng.normal(size=(6, 7))) for i in range(6)]
        fit = fit_params(images)
        hand_set = Params().cost_weights / Params().cost_weights.sum()
        hand_margins = [float((image.differences @ hand_set).min()) for image in images]
        self.assertGreaterEqual(fit.margins.sum(), sum(hand_margins) - 1e-9)

    def test_recovers_the_generating_weights(self):
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            truth = rng.dirichlet(np.ones(len(TERMS)))
            offsets = []
            while len(offsets) < 8:
                delta = rng.normal(size=len(TERMS))
                if abs(truth @ delta) >= 0.05:
                    offsets.append(delta if truth @ delta > 0 else -delta)
            images = []
            for i in range(5):
                positive = rng.random(len(TERMS))
                negatives = [positive + rng.uniform(0.5, 2.0) * d for d in offsets]
                images.append(_image(f"image-{i}", positive, negatives))
            fit = fit_params(images)
            for image in images:
                self.assertTrue(np.all(image.differences @ fit.weights > 0), f"seed {seed}")

    def test_needs_negatives(self):
        with self.assertLogs('learning', level='WARNING'):
            with self.assertRaises(LearningError):
                fit_params([_image('lonely', np.zeros(7), [])])

    def test_learned_params_keep_the_weight_total(self):
        fit = fit_params([_image('one', np.zeros(7), [np.eye(7)[2]])])
        params = learned_params(fit, Params())
        self.assertAlmostEqual(params.cost_weights.sum() / Params().cost_weights.sum(), 1.0)
        self.assertEqual((params.tau, params.epsilon), (Params().tau, Params().epsilon))


class PositiveTestCase(SimpleTestCase):
    def setUp(self):
        self.person = PersonParse(index=1, parts={
            Part.HEAD: _box(slice(0, 1), slice(0, 1)),
            Part.TORSO: _box(slice(1, 8), slice(0, 7)),
        })

    def test_confident_head_claims_the_person(self):
        instances = [_instance(0, 0, 0, peak_prob=0.5), _instance(1, 2, 2, peak_prob=0.9), _instance(2, 12, 12)]
        owners = match_heads(instances, [self.person])
        self.assertEqual(list(owners), [1])

    def test_regions_inside_the_part_are_added_while_feasible(self):
        regions = [
            make_region(0, Part.TORSO, _box(slice(4, 7), slice(0, 4))),  # inside, overlaps region 1
            make_region(1, Part.TORSO, _box(slice(3, 7), slice(0, 4))),  # inside, largest
            make_region(2, Part.TORSO, _box(slice(1, 5), slice(4, 8))),  # three quarters inside
        ]
        instances = [_instance(0, 0, 0)]
        problem = _torso_problem(regions, instances)
        x = positive_assignment(problem, regions, match_heads(instances, [self.person]))
        self.assertEqual(x.tolist(), [0, 1, 0])
        self.assertTrue(problem.complete(x).is_feasible)

    def test_unmatched_instances_get_nothing(self):
        regions = [make_region(0, Part.TORSO, _box(slice(2, 5), slice(0, 4)))]
        problem = _torso_problem(regions, [_instance(0, 12, 12)])
        x = positive_assignment(problem, regions, match_heads([_instance(0, 12, 12)], [self.person]))
        self.assertFalse(x.any())


class NegativeSamplingTestCase(SimpleTestCase):
    def test_samples_are_feasible_negatives(self):
        for seed in range(5):
            example = _random_example(70 + seed)
            problem = example.problems[Part.TORSO]
            positive = person_masks(example, example.positive)
            negatives = sample_negatives(example, np.random.default_rng(seed), count=6, attempts=2000)
            self.assertLessEqual(len(negatives), 6)
            for negative in negatives:
                x = negative.assignment[Part.TORSO]
                solution = problem.complete(x)
                self.assertTrue(problem.is_feasible(solution.x, solution.y, solution.e))
                self.assertLess(assembly_iou(person_masks(example, negative.assignment), positive,
                                             example.instance_ids), 0.5)
                self.assertAlmostEqual(negative.energy(problem.params.cost_weights), solution.objective, places=6)

    def test_same_seed_same_samples(self):
        example = _random_example(80)
        first = sample_negatives(example, np.random.default_rng(1), count=4)
        second = sample_negatives(example, np.random.default_rng(1), count=4)
        self.assertEqual([n.values.tolist() for n in first], [n.values.tolist() for n in second])

    def test_no_feasible_negative(self):
        # the only region is larger than an arm may be, so every sample is the empty
        # assembly, which equals the empty ground truth
        region = make_region(0, Part.ARM, _box(slice(0, 7), slice(0, 7)))
        instance = _instance(0, 10, 10)
        problem = build_stage2(Part.ARM, [region], [instance], _zero_features(1, 1), [1.0],
                               pairwise_exclusions([region]), SMALL_ANTHRO, Params())
        example = AssemblyExample(name='tight', problems={Part.ARM: problem}, regions={Part.ARM: [region]},
                                  positive={Part.ARM: np.zeros(1, dtype=np.int8)})
        with self.assertLogs('learning', level='WARNING'):
            self.assertEqual(sample_negatives(example, np.random.default_rng(0), count=3, attempts=50), [])

    def test_training_images_skip_empty_ground_truth(self):
        example = _random_example(81)
        empty = AssemblyExample(name='empty', problems=example.problems, regions=example.regions,
                                positive={Part.TORSO: np.zeros_like(example.positive[Part.TORSO])})
        images = training_images([example, empty], seed=3, count=2, threads=2)
        self.assertEqual([image.name for image in images], ['random-81'] if example.positive[Part.TORSO].any()
                         else [])


class EpsilonTestCase(SimpleTestCase):
    def test_percentile_of_same_part_distances(self):
        image = np.zeros(SHAPE + (3,), dtype=np.uint8)
        image[:, :8] = (255, 0, 0)
        image[:, 8:] = (0, 0, 255)
        regions = [
            make_region(0, Part.TORSO, _box(slice(0, 2), slice(0, 2)), image),
            make_region(1, Part.TORSO, _box(slice(4, 6), slice(0, 2)), image),
            make_region(2, Part.TORSO, _box(slice(0, 2), slice(10, 12)), image),
        ]
        problem = _torso_problem(regions, [_instance(0, 5, 5)], Params(epsilon=1.99))
        example = AssemblyExample(name='colours', problems={Part.TORSO: problem}, regions={Part.TORSO: regions},
                                  positive={Part.TORSO: np.ones(3, dtype=np.int8)})
        # distances 0, 2, 2
        self.assertAlmostEqual(estimate_epsilon([example]), 2.0)
        self.assertAlmostEqual(estimate_epsilon([example], percentile=0), 0.0)

    def test_needs_two_regions_in_a_part(self):
        example = _random_example(82, n_regions=1, n_instances=1)
        with self.assertLogs('learning', level='WARNING'):
            self.assertIsNone(estimate_epsilon([example]))


class TauSearchTestCase(SimpleTestCase):
    def test_pick_prefers_the_best_then_the_first(self):
        self.assertEqual(pick_tau({0.1: 0.5, 0.2: 0.7, 0.3: 0.7}), 0.2)
        self.assertEqual(pick_tau({0.3: 0.1}), 0.3)

    def test_empty_grid(self):
        with self.assertRaises(ValueError):
            search_tau([], [], Params())

    def test_grid_on_a_fixture(self):
        fixture = render_fixture(90, people=1, reference_height=48.0)
        scene = prepare_scene(fixture.stack, fixture.proposals, fixture.anthro, fixture.image)
        scenes = [(scene, fixture.persons, fixture.anthro)]
        scores = tau_scores(scenes, [0.1, 0.3], Params.from_settings())
        self.assertEqual(set(scores), {0.1, 0.3})
        self.assertTrue(all(0.0 <= value <= 1.0 for value in scores.values()))
        self.assertEqual(scores[pick_tau(scores)], max(scores.values()))
        self.assertEqual(search_tau(scenes, [0.25], Params.from_settings()), 0.25)


class LearnCommandTestCase(SimpleTestCase):
    def test_writes_params(self):
        with tempfile.TemporaryDirectory() as root:
            for seed in (91, 92):
                fixture = render_fixture(seed, people=1, reference_height=48.0)
                write_fixture(fixture, os.path.join(root, f"scene-{seed}"))
            out = os.path.join(root, 'params.json')
            call_command('learn', train=root, out=out, negatives=3, tau_grid='0.2', seed=0, threads=1,
                         stdout=io.StringIO())
            params = Params.from_dict(read_json(out))
        self.assertEqual(params.tau, 0.2)
        self.assertAlmostEqual(params.cost_weights.sum() / Params.from_settings().cost_weights.sum(), 1.0)
        self.assertTrue(0 < params.epsilon < 2)
