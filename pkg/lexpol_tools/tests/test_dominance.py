from . import *
from ..evaluation import grid_cells


def gated_actor(**overrides) -> CompositeActor:
    return LexpolAgent.build(tiny_agent_config(**overrides), 3, 2).actor


class TestGrid(TestCase):
    def test_cells_cover_the_t(self) -> None:
        cells = grid_cells(10)
        # 3 crossbar rows of 10 cells, 7 stem rows of 2
        self.assertEqual(44, len(cells))
        g = TMazeGeometry()
        self.assertTrue(all(g.contains(c) for c in cells))

    def test_resolution_must_be_positive(self) -> None:
        with self.assertRaises(ArgumentError):
            grid_cells(0)


class TestDominanceMap(TestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_one_hot_gate(self) -> None:
        actor = gated_actor()
        actor.gate_net.weights[-1][...] = 0.0
        actor.gate_net.biases[-1][...] = [50.0, -50.0]
        dmap = emit_dominance_map(actor, make_suite("tmaze_composite"), res=12)
        npt.assert_array_equal(np.zeros_like(dmap.argmax_idx), dmap.argmax_idx)
        npt.assert_array_equal(np.ones_like(dmap.max_alpha), dmap.max_alpha)
        self.assertEqual(1.0, dmap.fraction(0))
        self.assertEqual(0.0, dmap.fraction(1))

    def test_phase_selects_the_metadata(self) -> None:
        actor = gated_actor()
        suite = make_suite("tmaze_composite")
        self.assertEqual(TaskMetadata("red", RED_TEXT), emit_dominance_map(actor, suite, 4).metadata)
        self.assertEqual(TaskMetadata("blue", BLUE_TEXT), emit_dominance_map(actor, suite, 4, "seek_blue").metadata)
        static = emit_dominance_map(actor, suite, 4, "static")
        self.assertEqual(COMPOSITE_TEXT, static.metadata.text)

    def test_context_only_gate_is_constant_over_the_maze(self) -> None:
        dmap = emit_dominance_map(gated_actor(), make_suite("tmaze_pair"), res=8, phase="seek_blue")
        self.assertEqual(1, len(set(dmap.argmax_idx.tolist())))
        self.assertTrue(np.all(dmap.max_alpha >= 0.5))
        npt.assert_allclose(dmap.max_alpha, dmap.max_alpha[0], rtol=1e-12)

    def test_rejected_actors_and_suites(self) -> None:
        with self.assertRaises(ArgumentError):
            emit_dominance_map(gated_actor(k=1), make_suite("tmaze_composite"))
        with self.assertRaises(TypeError):
            emit_dominance_map(gated_actor(mode="mtsac_flat"), make_suite("tmaze_composite"))
        with self.assertRaises(ConfigError):
            emit_dominance_map(gated_actor(), make_suite("nav_k_tasks"))

    def test_csv_round_trip(self) -> None:
        out = self.dir / "maps" / "seek_red.csv"
        dmap = emit_dominance_map(gated_actor(), make_suite("tmaze_composite"), res=6, phase="static", out=out)
        again = DominanceMap.read_csv(out)
        self.assertEqual((dmap.res, dmap.phase, dmap.metadata), (again.res, again.phase, again.metadata))
        for field in ("x", "y", "argmax_idx", "max_alpha"):
            npt.assert_array_equal(getattr(dmap, field), getattr(again, field))
        self.assertTrue(out.read_text(encoding="utf-8").startswith("# res=6 phase=static task_id=red_then_blue text="))

    def test_missing_header(self) -> None:
        path = self.dir / "bad.csv"
        path.write_text("x,y,argmax_idx,max_alpha\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            DominanceMap.read_csv(path)
