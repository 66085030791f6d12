import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from rasters.formats import (
    read_raster, write_raster, read_label_raster, write_label_raster, read_masks, write_masks,
)
from rasters.models import (
    RasterF32, LabelRaster, MaskRLE, MalformedRasterError, RunLengthError, DimensionMismatchError,
)
from rasters.rle import encode_rle, decode_rle, mask_area, mask_iou, mask_intersection, mask_union


class RasterFormatTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_raster_round_trip_is_exact(self):
        """A written raster reads back with identical values."""
        raster = RasterF32.from_array([[0.25, 1.5], [-3.0, 1e-7]])
        write_raster(self.dir / 'a.f32r', raster)
        loaded = read_raster(self.dir / 'a.f32r')
        self.assertEqual((loaded.width, loaded.height), (2, 2))
        np.testing.assert_array_equal(loaded.data, raster.data)

    def test_randomized_raster_round_trips(self):
        rng = np.random.default_rng(3)
        for i in range(50):
            h, w = rng.integers(1, 9, size=2)
            raster = RasterF32.from_array(rng.normal(size=(h, w)))
            write_raster(self.dir / f'{i}.f32r', raster)
            np.testing.assert_array_equal(read_raster(self.dir / f'{i}.f32r').data, raster.data)

    def test_truncated_payload_is_rejected(self):
        body = np.arange(5, dtype='<f4').tobytes()
        (self.dir / 'bad.f32r').write_bytes(b"F32 3 2\n" + body)
        with self.assertRaises(MalformedRasterError):
            read_raster(self.dir / 'bad.f32r')

    def test_non_finite_values_are_rejected(self):
        body = np.array([0.0, np.nan, 1.0, 2.0], dtype='<f4').tobytes()
        (self.dir / 'nan.f32r').write_bytes(b"F32 2 2\n" + body)
        with self.assertRaises(MalformedRasterError):
            read_raster(self.dir / 'nan.f32r')

    def test_malformed_header_is_rejected(self):
        (self.dir / 'hdr.f32r').write_bytes(b"F64 2 2\n" + bytes(16))
        with self.assertRaises(MalformedRasterError):
            read_raster(self.dir / 'hdr.f32r')

    def test_label_raster_round_trip(self):
        labels = np.array([[0, 1], [2, 2]])
        legend = {0: (0, 'background'), 1: (1, 'head'), 2: (2, 'torso')}
        raster = LabelRaster(width=2, height=2, labels=labels, legend=legend)
        write_label_raster(self.dir / 'parse', raster)
        loaded = read_label_raster(self.dir / 'parse')
        np.testing.assert_array_equal(loaded.labels, labels)
        self.assertEqual(loaded.legend, legend)
        np.testing.assert_array_equal(loaded.person_of(), [[0, 1], [2, 2]])

    def test_label_ids_must_be_in_legend(self):
        with self.assertRaises(MalformedRasterError):
            LabelRaster(width=1, height=1, labels=np.array([[3]]), legend={0: (0, 'background')})

    def test_masks_document_round_trip(self):
        masks = {4: encode_rle(np.eye(3, dtype=bool)), 9: encode_rle(np.ones((3, 3), dtype=bool))}
        write_masks(self.dir / 'p.masks.json', masks, 3, 3)
        self.assertEqual(read_masks(self.dir / 'p.masks.json'), masks)


class RunLengthTestCase(SimpleTestCase):
    def test_all_background(self):
        self.assertEqual(encode_rle(np.zeros((4, 4), dtype=bool)).runs, (16,))

    def test_all_foreground_has_leading_zero_run(self):
        self.assertEqual(encode_rle(np.ones((4, 4), dtype=bool)).runs, (0, 16))

    def test_randomized_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            mask = rng.random((8, 8)) < rng.random()
            encoded = encode_rle(mask)
            self.assertEqual(sum(encoded.runs), 64)
            np.testing.assert_array_equal(decode_rle(encoded), mask)
            self.assertEqual(mask_area(encoded), int(mask.sum()))

    def test_bad_run_sum_is_rejected(self):
        with self.assertRaises(RunLengthError):
            decode_rle(MaskRLE(width=2, height=2, runs=(1, 2)))


class MaskIoUTestCase(SimpleTestCase):
    def _mask(self, pixels, shape=(2, 2)):
        mask = np.zeros(shape, dtype=bool)
        for row, col in pixels:
            mask[row, col] = True
        return encode_rle(mask)

    def test_identical_masks(self):
        m = self._mask([(0, 0), (1, 1)])
        self.assertEqual(mask_iou(m, m), 1.0)

    def test_disjoint_masks(self):
        self.assertEqual(mask_iou(self._mask([(0, 0)]), self._mask([(1, 1)])), 0.0)

    def test_hand_counted_iou(self):
        m1 = self._mask([(0, 0), (0, 1)])
        m2 = self._mask([(0, 1), (1, 1)])
        self.assertAlmostEqual(mask_iou(m1, m2), 1 / 3)

    def test_empty_masks_have_zero_iou(self):
        self.assertEqual(mask_iou(self._mask([]), self._mask([])), 0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            mask_iou(self._mask([]), self._mask([], shape=(3, 2)))

    def test_iou_properties_on_random_masks(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a = encode_rle(rng.random((6, 5)) < 0.4)
            b = encode_rle(rng.random((6, 5)) < 0.4)
            iou = mask_iou(a, b)
            self.assertEqual(iou, mask_iou(b, a))
            self.assertGreaterEqual(iou, 0.0)
            self.assertLessEqual(iou, 1.0)
            if a.area > 0:
                self.assertEqual(iou == 1.0, a == b)
            self.assertEqual(
                mask_intersection(a, b).area + mask_union(a, b).area,
                a.area + b.area,
            )
