from . import *


class TestHashedEmbedding(TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.red = TaskMetadata("red", RED_TEXT)
        cls.blue = TaskMetadata("blue", BLUE_TEXT)

    def test_deterministic_unit_vectors(self) -> None:
        a, b = embed_hashed(self.red, 16, seed=3), embed_hashed(self.red, 16, seed=3)
        npt.assert_array_equal(a.vector, b.vector)
        self.assertAlmostEqual(1.0, float(np.linalg.norm(a.vector)), places=12)
        self.assertEqual("hashed", a.provider_tag)
        self.assertEqual(16, a.n)

    def test_word_order_and_case_do_not_matter(self) -> None:
        shuffled = TaskMetadata("red", "Goal RED the to go")
        npt.assert_array_equal(embed_hashed(self.red, 16).vector, embed_hashed(shuffled, 16).vector)

    def test_texts_differ(self) -> None:
        self.assertFalse(np.allclose(embed_hashed(self.red, 16).vector, embed_hashed(self.blue, 16).vector))

    def test_empty_text_rejected(self) -> None:
        with self.assertRaises(ConfigError):
            TaskMetadata("red", "   ")
        with self.assertRaises(ConfigError):
            embed_hashed(TaskMetadata("red", "!!"), 8)


class TestEmbeddingTable(TestCase):
    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "table.csv"
        self.table = EmbeddingTable({"red": np.array([0.1, -0.2, 1 / 3]), "blue": np.array([1.0, 2.0, 3.0])})

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_csv_round_trip_is_exact(self) -> None:
        self.table.write_csv(self.path)
        loaded = EmbeddingTable.read_csv(self.path)
        for key, vec in self.table.vectors.items():
            npt.assert_array_equal(vec, loaded.vectors[key])

    def test_lookup(self) -> None:
        emb = embed_table(TaskMetadata("blue", BLUE_TEXT), self.table)
        npt.assert_array_equal([1.0, 2.0, 3.0], emb.vector)
        with self.assertRaises(TaskLookupError):
            embed_table(TaskMetadata("green", "go to the green goal"), self.table)

    def test_ragged_rows_rejected(self) -> None:
        with self.assertRaises(ShapeError):
            EmbeddingTable({"a": np.zeros(2), "b": np.zeros(3)})

    def test_bad_header(self) -> None:
        self.path.write_text("id,x\nred,1\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            EmbeddingTable.read_csv(self.path)


class TestContextEncoder(TestCase):
    def setUp(self) -> None:
        self.metas = [TaskMetadata("red", RED_TEXT), TaskMetadata("blue", BLUE_TEXT)]

    def test_stopgrad_head_receives_no_gradient(self) -> None:
        enc = ContextEncoder.build(np.random.default_rng(0), n=4, hidden=6, raw_dim=8, stopgrad=True)
        self.assertFalse(enc.trainable)
        z = enc.encode(self.metas)
        self.assertEqual((2, 4), z.shape)
        enc.backward(np.ones_like(z))
        for g in enc.head.tape.arrays():
            npt.assert_array_equal(np.zeros_like(g), g)

    def test_trainable_head_receives_gradient(self) -> None:
        enc = ContextEncoder.build(np.random.default_rng(0), n=4, hidden=6, raw_dim=8, stopgrad=False)
        self.assertTrue(enc.trainable)
        z = enc.encode(self.metas)
        enc.backward(np.ones_like(z))
        self.assertGreater(sum(float(np.abs(g).sum()) for g in enc.head.tape.arrays()), 0.0)

    def test_without_head(self) -> None:
        enc = ContextEncoder("hashed", n=8, seed=2)
        self.assertEqual(8, enc.n)
        npt.assert_array_equal(embed_hashed(self.metas[0], 8, 2).vector, enc.encode(self.metas)[0])
        self.assertFalse(enc.embed(self.metas[0]).head_applied)

    def test_table_provider_needs_table(self) -> None:
        with self.assertRaises(ConfigError):
            ContextEncoder("table", n=4)
