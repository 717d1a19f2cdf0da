import numpy as np
from django.test import SimpleTestCase

from .exceptions import ChannelSpecError, ImageFormatError, InvalidPillarError, MapLibraryError
from .forward import (
    CLASS_TABLE,
    ChannelSpec,
    MapGenParams,
    PillarConfig,
    build_map,
    class_table,
    compose,
    identity_grid,
    initial_shape,
    lookup,
    mirror_index,
    mirror_sequence,
    pillar_config,
    render,
    render_frames,
    shape_from_grid,
)
from .imaging import shape_from_pgm, shape_to_pgm
from .library import PillarLibrary, library_from_bytes, library_to_bytes


class LibraryMixin:
    library = None

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        if LibraryMixin.library is None:
            LibraryMixin.library = PillarLibrary.build()


class ClassTableTests(SimpleTestCase):

    def test_first_two_classes(self):
        table = class_table()
        self.assertEqual((table[0].position, table[0].diameter), (0.0, 0.375))
        self.assertEqual((table[1].position, table[1].diameter), (0.125, 0.375))

    def test_table_is_a_bijection(self):
        self.assertEqual(len(CLASS_TABLE), 32)
        self.assertEqual([c.index for c in CLASS_TABLE], list(range(1, 33)))
        self.assertEqual(len({(c.position, c.diameter) for c in CLASS_TABLE}), 32)

    def test_mirror_partners(self):
        self.assertEqual(mirror_index(1), 1)
        self.assertEqual(mirror_index(2), 8)
        self.assertEqual(mirror_index(4), 6)
        # the wall class is its own partner
        self.assertEqual(mirror_index(5), 5)
        for config in CLASS_TABLE:
            partner = pillar_config(mirror_index(config.index))
            self.assertEqual(partner.diameter, config.diameter)
            self.assertEqual(mirror_index(partner.index), config.index)
        self.assertEqual(mirror_sequence([2, 3, 5]), [8, 7, 5])

    def test_invalid_indices(self):
        for bad in (0, 33, -1, 2.0, '3'):
            with self.assertRaises(InvalidPillarError):
                pillar_config(bad)

    def test_invalid_config(self):
        with self.assertRaises(InvalidPillarError):
            PillarConfig(index=1, position=0.0, diameter=0.0)
        with self.assertRaises(InvalidPillarError):
            PillarConfig(index=1, position=0.6, diameter=0.5)


class ChannelTests(SimpleTestCase):

    def test_default_stripe(self):
        shape = initial_shape(ChannelSpec())
        self.assertEqual(shape.shape, (12, 100))
        self.assertEqual(shape.dtype, np.uint8)
        self.assertEqual(int(shape.sum()), 300)
        columns = np.flatnonzero(shape.any(axis=0))
        self.assertEqual((columns[0], columns[-1]), (37, 61))

    def test_full_inlet(self):
        self.assertEqual(int(initial_shape(ChannelSpec(inlet_fraction=1.0)).sum()), 1200)

    def test_small_channel(self):
        shape = initial_shape(ChannelSpec(height_px=2, width_px=4, inlet_fraction=0.5))
        np.testing.assert_array_equal(shape, [[0, 1, 1, 0], [0, 1, 1, 0]])

    def test_invalid_channels(self):
        with self.assertRaises(ChannelSpecError):
            ChannelSpec(height_px=1)
        with self.assertRaises(ChannelSpecError):
            ChannelSpec(inlet_fraction=0.0)
        with self.assertRaises(ChannelSpecError):
            ChannelSpec(width_px=10, inlet_fraction=0.05)

    def test_invalid_generator_params(self):
        with self.assertRaises(ChannelSpecError):
            MapGenParams(substeps=0)
        with self.assertRaises(ChannelSpecError):
            MapGenParams(amplitude=-0.1)


class BuildMapTests(SimpleTestCase):
    channel = ChannelSpec()

    def test_zero_amplitude_is_identity(self):
        params = MapGenParams(amplitude=0.0)
        for index in (1, 5, 18, 32):
            deformation = build_map(pillar_config(index), self.channel, params)
            np.testing.assert_array_equal(deformation.backward_grid, identity_grid(self.channel))

    def test_mirrored_config_mirrors_grid(self):
        params = MapGenParams()
        width = self.channel.width_px
        for config in CLASS_TABLE:
            grid = build_map(config, self.channel, params).backward_grid
            partner = build_map(pillar_config(mirror_index(config.index)), self.channel, params).backward_grid
            flipped = grid[:, ::-1].copy()
            flipped[..., 1] = (width - 1) - flipped[..., 1]
            with self.subTest(index=config.index):
                np.testing.assert_allclose(partner, flipped, rtol=0, atol=1e-9)

    def test_single_substep_matches_analytic_field(self):
        params = MapGenParams(amplitude=0.15, width_scale=0.75, substeps=1)
        height, width = self.channel.shape
        rows, cols = np.meshgrid(np.arange(height, dtype=float), np.arange(width, dtype=float), indexing='ij')
        y = (cols - (width - 1) / 2) / (width - 1)
        z = rows / (height - 1)
        for index in (2, 11, 27):
            config = pillar_config(index)
            sigma = 0.75 * config.diameter
            d = (y - config.position) / sigma
            envelope = np.exp(-d * d / 2)
            strength = 0.15 * config.diameter ** 1.5
            dy = strength * d * envelope * np.pi * np.cos(np.pi * z)
            dz = -strength * np.sin(np.pi * z) * envelope * (1 - d * d) / sigma
            expected_rows = rows - dz * (height - 1)
            expected_cols = cols - dy * (width - 1)
            interior = ((expected_rows > 0) & (expected_rows < height - 1)
                        & (expected_cols > 0) & (expected_cols < width - 1))
            grid = build_map(config, self.channel, params).backward_grid
            with self.subTest(index=index):
                self.assertTrue(interior.any())
                np.testing.assert_allclose(grid[..., 0][interior], expected_rows[interior], rtol=0, atol=1e-9)
                np.testing.assert_allclose(grid[..., 1][interior], expected_cols[interior], rtol=0, atol=1e-9)

    def test_grid_stays_inside_channel(self):
        params = MapGenParams(amplitude=0.6)
        for config in CLASS_TABLE:
            grid = build_map(config, self.channel, params).backward_grid
            self.assertGreaterEqual(grid.min(), 0.0)
            self.assertLessEqual(grid[..., 0].max(), 11.0)
            self.assertLessEqual(grid[..., 1].max(), 99.0)


class ComposeTests(LibraryMixin, SimpleTestCase):

    def test_empty_sequence_is_identity(self):
        np.testing.assert_array_equal(compose([], self.library), identity_grid(self.library.channel))

    def test_single_pillar_is_its_map(self):
        for index in (1, 16, 32):
            np.testing.assert_array_equal(compose([index], self.library), self.library.grid(index))

    def test_two_pillars_chain_by_hand(self):
        first, second = 3, 22
        grid_a = self.library.grid(first)
        grid_b = self.library.grid(second)
        composed = compose([first, second], self.library)
        height, width = self.library.channel.shape
        checked = 0
        for i in range(0, height, 3):
            for j in range(0, width, 7):
                r, c = grid_b[i, j]
                if not (0 < r < height - 1 and 0 < c < width - 1):
                    continue
                r0, c0 = int(np.floor(r)), int(np.floor(c))
                fr, fc = r - r0, c - c0
                expected = ((1 - fr) * (1 - fc) * grid_a[r0, c0] + (1 - fr) * fc * grid_a[r0, c0 + 1]
                            + fr * (1 - fc) * grid_a[r0 + 1, c0] + fr * fc * grid_a[r0 + 1, c0 + 1])
                np.testing.assert_allclose(composed[i, j], expected, rtol=0, atol=1e-9)
                checked += 1
        self.assertGreater(checked, 10)

    def test_invalid_index_names_position(self):
        with self.assertRaises(InvalidPillarError) as ctx:
            compose([1, 2, 40, 3], self.library)
        self.assertEqual(ctx.exception.position, 2)


class RenderTests(LibraryMixin, SimpleTestCase):

    def test_empty_sequence_is_initial_stripe(self):
        np.testing.assert_array_equal(render([], self.library), initial_shape(self.library.channel))

    def test_mirrored_sequences_render_mirrored(self):
        for index in range(1, 33):
            with self.subTest(index=index):
                np.testing.assert_array_equal(
                    render([index], self.library)[:, ::-1],
                    render([mirror_index(index)], self.library),
                )

    def test_single_pillars_nearly_preserve_area(self):
        for index in range(1, 33):
            count = int(render([index], self.library).sum())
            with self.subTest(index=index):
                self.assertGreaterEqual(count, 270)
                self.assertLessEqual(count, 330)

    def test_single_pillars_are_distinguishable(self):
        renders = {render([index], self.library).tobytes() for index in range(1, 33)}
        self.assertEqual(len(renders), 32)

    def test_small_neighbouring_pillars_differ(self):
        # smallest diameter at neighbouring positions, and the wall class at both ends of the diameter range
        for first, second in ((27, 28), (30, 31), (21, 29)):
            with self.subTest(pair=(first, second)):
                self.assertFalse(np.array_equal(render([first], self.library), render([second], self.library)))

    def test_render_is_deterministic(self):
        sequence = [4, 17, 9, 30, 2]
        first = render(sequence, self.library)
        second = render(sequence, PillarLibrary.build())
        self.assertEqual(first.dtype, np.uint8)
        np.testing.assert_array_equal(first, second)

    def test_composition_consistency(self):
        channel = self.library.channel
        for seed in range(10):
            rng = np.random.default_rng(seed)
            head = [int(k) for k in rng.integers(1, 33, size=rng.integers(0, 4))]
            tail = [int(k) for k in rng.integers(1, 33, size=rng.integers(0, 4))]
            whole = render(head + tail, self.library)
            chained = shape_from_grid(lookup(compose(head, self.library), compose(tail, self.library)), channel)
            agreement = 1 - np.abs(whole.astype(int) - chained).sum() / whole.size
            with self.subTest(head=head, tail=tail):
                self.assertGreaterEqual(agreement, 0.98)

    def test_frames_cover_every_prefix(self):
        frames = render_frames([7, 12, 25], self.library)
        self.assertEqual(len(frames), 4)
        np.testing.assert_array_equal(frames[0], initial_shape(self.library.channel))
        np.testing.assert_array_equal(frames[2], render([7, 12], self.library))


class LibraryCodecTests(LibraryMixin, SimpleTestCase):

    def test_round_trip(self):
        data = library_to_bytes(self.library)
        self.assertEqual(data[:4], b'FSMP')
        restored = library_from_bytes(data)
        self.assertEqual(restored.channel, self.library.channel)
        self.assertEqual(library_to_bytes(restored), data)

    def test_grids_are_read_only(self):
        with self.assertRaises(ValueError):
            self.library.grid(1)[0, 0, 0] = 5.0

    def test_truncated_library(self):
        data = library_to_bytes(self.library)
        with self.assertRaises(MapLibraryError):
            library_from_bytes(data[:-8])
        with self.assertRaises(MapLibraryError):
            library_from_bytes(data[:10])

    def test_bad_magic(self):
        data = library_to_bytes(self.library)
        with self.assertRaises(MapLibraryError):
            library_from_bytes(b'NOPE' + data[4:])

    def test_missing_maps(self):
        with self.assertRaises(MapLibraryError):
            PillarLibrary(channel=self.library.channel, maps=self.library.maps[:31])


class ImagingTests(LibraryMixin, SimpleTestCase):

    def test_pgm_round_trip(self):
        shape = render([3, 14, 29], self.library)
        data = shape_to_pgm(shape)
        self.assertTrue(data.startswith(b'P5'))
        np.testing.assert_array_equal(shape_from_pgm(data), shape)

    def test_fluid_is_white(self):
        data = shape_to_pgm(np.ones((2, 3), dtype=np.uint8))
        self.assertTrue(data.endswith(b'\xff' * 6))

    def test_rejects_non_images(self):
        with self.assertRaises(ImageFormatError):
            shape_from_pgm(b'definitely not an image')

    def test_rejects_colour_images(self):
        colour = b'P6\n2 1\n255\n' + bytes(6)
        with self.assertRaises(ImageFormatError):
            shape_from_pgm(colour)

    def test_rejects_non_2d(self):
        with self.assertRaises(ImageFormatError):
            shape_to_pgm(np.zeros((2, 2, 2)))
