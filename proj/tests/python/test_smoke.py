import math

import numpy as np
import pytest

import ragaseq as rs


def test_cents_and_quantization():
    assert rs.normalize_cents(440.0, 220.0) == pytest.approx(1200.0)
    assert rs.quantize(220.0 * 2 ** (1 / 12), 220.0, 5) == 5
    assert rs.compute_num_samples(10_000, 5_000) == math.ceil(2.2 * 10_000 / 5_000)


def test_vocabulary_layout():
    vocab = rs.Vocabulary()
    assert vocab.size == 243
    assert rs.Vocabulary.PAD == 0 and rs.Vocabulary.OOV == 1
    assert rs.values_to_ids([0, 10_000], vocab) == [vocab.id_of(0), rs.Vocabulary.OOV]


def test_pitch_of_a_sine():
    sr = 16_000
    t = np.arange(sr) / sr
    times, f0 = rs.track_pitch((0.5 * np.sin(2 * np.pi * 220.0 * t)).astype(np.float32), sr)
    assert len(times) == len(f0) > 0
    voiced = f0[f0 > 0]
    assert abs(np.median(voiced) - 220.0) < 2.2


def test_votes_abstain_below_majority():
    assert rs.tally_votes([0, 0, 0, 1, 1], 2).label == 0
    assert rs.tally_votes([0, 0, 1, 1], 2).abstained


def test_invalid_input_raises():
    with pytest.raises(ValueError):
        rs.tally_votes([5], 2)


def test_train_classify_and_retrieve(tmp_path):
    sc = rs.SynthConfig()
    sc.n_ragas, sc.recordings_per_raga, sc.seq_len, sc.seed = 2, 2, 600, 3
    ds = rs.generate_synthetic_corpus(sc, tmp_path / "corpus")
    assert len(ds) == 4 and ds.num_classes == 2
    recs = rs.load_recordings(ds)
    samples = rs.sample_training_set(recs, 200, seed=1)

    mc = rs.ModelConfig()
    mc.embed_dim, mc.lstm_hidden, mc.attention_dim, mc.dense1_units = 4, 4, 4, 8
    mc.n_classes, mc.subseq_len = 2, 200
    tc = rs.TrainConfig()
    tc.max_epochs, tc.learning_rate, tc.batch_size = 2, 3e-3, 8
    params, report = rs.train_classifier(samples, tc, mc)
    assert len(report.losses) == 2

    model = rs.Checkpoint(mc, params)
    rs.save_checkpoint(tmp_path / "m.ckpt", model)
    loaded = rs.load_checkpoint(tmp_path / "m.ckpt")
    window = samples[0].ids
    np.testing.assert_array_equal(rs.window_probs(model, window), rs.window_probs(loaded, window))
    probs = rs.window_probs(loaded, window)
    assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    verdict = rs.classify_recording(loaded, recs[0], 200)
    assert verdict.windows == 3

    index = rs.EmbeddingIndex(2)
    for i, v in enumerate([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]):
        index.add(v, f"r{i}")
    index.save(tmp_path / "ix.bin")
    reloaded = rs.EmbeddingIndex.load(tmp_path / "ix.bin")
    assert [row for row, _ in rs.query_top_k(reloaded, [0.9, 0.0], 2)] == [1, 0]
    assert [row for row, _ in rs.query_top_k(reloaded, [0.9, 0.0], 2, exclude=1)] == [0, 2]
