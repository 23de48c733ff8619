import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gqa.data import Document, Example, generate_synthetic, save_hotpot_json
from gqa.errors import CheckpointError, ContractError, ParseError, TrainingError
from gqa.harness import (
    METRIC_KEYS,
    Adam,
    SGD,
    TrainConfig,
    answer_scores,
    clip_by_global_norm,
    em_f1,
    evaluate,
    joint_scores,
    load_config,
    normalize_answer,
    oracle_predictor,
    parse_config_text,
    supporting_scores,
    train,
)
from gqa.harness.cli import main
from gqa.model import (
    Checkpoint,
    Decoded,
    GQAModel,
    ModelConfig,
    dumps_checkpoint,
    load_checkpoint,
    loads_checkpoint,
    save_checkpoint,
)
from gqa.model.inputs import Prepared
from gqa.numerics import Parameter, Tensor, ops
from miniature import MINI_CONFIG, mini_example, mini_vocab

TINY = dict(emb_dim=4, char_emb_dim=2, char_dim=2, hidden=2, steps=1)
OVERFIT = dict(
    emb_dim=16, char_emb_dim=4, char_dim=8, hidden=16, steps=2,
    optimizer="adam", lr=0.01, lr_schedule="cosine", batch_size=4, w_sp=5.0, seed=0,
)


# Answer metrics ----------------------------------------------------------------------------

def test_em_f1_hand_cases():
    assert em_f1("The Cat", "cat") == (1, 1.0)
    em, f1 = em_f1("red apple", "apple")
    assert em == 0 and f1 == pytest.approx(2 * 0.5 * 1 / 1.5)
    assert round(f1, 4) == 0.6667
    assert em_f1("", "") == (1, 1.0)
    assert em_f1("", "apple") == (0, 0.0)


def test_normalization():
    assert normalize_answer("  An Apple, the  PIE! ") == "apple pie"


def test_polar_answers_score_only_exactly():
    assert em_f1("yes", "yes") == (1, 1.0)
    assert em_f1("yes", "no") == (0, 0.0)
    assert em_f1("no", "no way") == (0, 0.0)


def test_repeated_tokens_use_multiset_overlap():
    _, f1, p, r = answer_scores("a b b b", "b c")
    # articles drop "a": pred = b b b, gold = b c, overlap 1
    assert (p, r) == (1 / 3, 1 / 2)
    assert f1 == pytest.approx(0.4)


words = st.sampled_from(["the", "a", "cat", "dog", "red", "apple", "Paris", "yes", "no", ",", "x"])
phrases = st.lists(words, max_size=6).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(phrases, phrases)
def test_answer_metric_bounds(pred, gold):
    em, f1 = em_f1(pred, gold)
    assert em in (0, 1)
    assert 0.0 <= f1 <= 1.0
    if em:
        assert f1 == 1.0


facts = st.frozensets(st.tuples(st.integers(0, 2), st.integers(0, 3)), max_size=5)


@settings(max_examples=200, deadline=None)
@given(phrases, phrases, facts, facts)
def test_joint_never_exceeds_components(pred, gold, sp_pred, sp_gold):
    ans = answer_scores(pred, gold)
    sp = supporting_scores(sp_pred, sp_gold)
    joint_em, joint_f1 = joint_scores(ans, sp)
    assert joint_em <= min(ans[0], sp[0])
    assert joint_f1 <= min(ans[1], sp[1]) + 1e-12


def test_supporting_scores():
    assert supporting_scores({(0, 0), (1, 2)}, {(0, 0), (1, 2)})[:2] == (1, 1.0)
    em, f1, p, r = supporting_scores({(0, 0)}, {(0, 0), (1, 2)})
    assert (em, p, r) == (0, 1.0, 0.5) and f1 == pytest.approx(2 / 3)
    assert supporting_scores(set(), {(0, 0)})[:2] == (0, 0.0)


# Evaluation ----------------------------------------------------------------------------------

def test_oracle_predictor_scores_perfectly():
    report = evaluate(oracle_predictor, generate_synthetic(9, 20, seed=1))
    assert report.to_dict() == {k: 1.0 for k in METRIC_KEYS}
    assert report.type_accuracy == 1.0


def test_empty_prediction_scores_zero():
    ex = mini_example()
    report = evaluate(lambda e: Decoded("", "span", frozenset(), (0, 0)), [ex])
    assert report.em == report.f1 == report.joint_f1 == 0.0


def test_report_keys_and_bounds():
    examples = generate_synthetic(6, 20, seed=2)
    model = GQAModel(ModelConfig(**{**{k: v for k, v in TINY.items() if k != "steps"}, "ggnn_steps": 1}))
    vocab = mini_vocab(examples)
    report = evaluate(model, examples, vocab)
    assert tuple(report.to_dict()) == METRIC_KEYS
    for k in METRIC_KEYS:
        assert 0.0 <= getattr(report, k) <= 1.0
    for rec in report.records:
        assert rec["joint_em"] <= min(rec["em"], rec["sp_em"])
        assert rec["joint_f1"] <= min(rec["f1"], rec["sp_f1"]) + 1e-12


def test_evaluate_rejects_empty_and_vocabless():
    with pytest.raises(ContractError):
        evaluate(oracle_predictor, [])
    with pytest.raises(ContractError):
        evaluate(GQAModel(MINI_CONFIG), [mini_example()])


# Configuration -------------------------------------------------------------------------------

def test_config_defaults_and_lambda_pair():
    cfg = TrainConfig()
    assert (cfg.lambda_train, cfg.lambda_test) == (0.5, 0.05)
    assert cfg.optimizer == "sgd"
    with pytest.raises(ContractError):
        TrainConfig(lambda_test=-0.1)


def test_config_file_parsing_and_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nhidden = 12\nlr=0.5\n\nggnn_hidden = none\ntrain_path = data/x.json\n")
    cfg = load_config(path, lr=0.25, seed=None)
    assert cfg.hidden == 12 and cfg.lr == 0.25 and cfg.ggnn_hidden is None
    assert cfg.train_path == "data/x.json"


def test_config_rejects_unknown_and_malformed():
    with pytest.raises(ParseError, match="unknown config key 'hiden'"):
        parse_config_text("hiden = 3")
    with pytest.raises(ParseError, match=":2:"):
        parse_config_text("hidden = 3\nnot a pair")
    with pytest.raises(ParseError, match="int"):
        parse_config_text("hidden = three")


# Optimization --------------------------------------------------------------------------------

def test_clip_by_global_norm():
    grads = [np.array([3.0]), np.array([4.0])]
    clipped, norm = clip_by_global_norm(grads, 1.0)
    assert norm == 5.0
    np.testing.assert_allclose([g[0] for g in clipped], [0.6, 0.8])
    same, _ = clip_by_global_norm(grads, 10.0)
    assert same[0][0] == 3.0


def test_optimizer_steps():
    p = Parameter(np.array([1.0, -1.0]))
    SGD([p], lr=0.1).step([np.array([1.0, 2.0])])
    np.testing.assert_allclose(p.data, [0.9, -1.2])
    q = Parameter(np.array([1.0]))
    Adam([q], lr=0.1).step([np.array([5.0])])
    # first bias-corrected Adam step moves by lr in the gradient's sign direction
    assert q.data[0] == pytest.approx(0.9, abs=1e-8)


# Training ------------------------------------------------------------------------------------

def test_training_is_deterministic(tmp_path):
    examples = generate_synthetic(8, 20, seed=3)
    runs = []
    for name in ("a", "b"):
        cfg = TrainConfig(**TINY, epochs=2, batch_size=3, lr=0.1, checkpoint_dir=str(tmp_path / name))
        runs.append(train(cfg, examples))
    assert [h.to_dict() for h in runs[0].history] == [h.to_dict() for h in runs[1].history]
    for f in ("epoch-001.ckpt", "epoch-002.ckpt", "train_log.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_best_checkpoint_written_with_dev(tmp_path):
    examples = generate_synthetic(6, 20, seed=4)
    cfg = TrainConfig(**TINY, epochs=2, batch_size=3, checkpoint_dir=str(tmp_path))
    result = train(cfg, examples[:4], examples[4:])
    assert (tmp_path / "best.ckpt").exists()
    assert result.best_epoch in (1, 2)
    assert set(result.history[0].dev) == set(METRIC_KEYS)


def test_loss_drops_over_first_epochs():
    result = train(TrainConfig(**OVERFIT, epochs=5), generate_synthetic(32, 40, seed=0))
    assert result.history[4].loss < result.history[0].loss


def test_lambda_defaults_reach_topology(monkeypatch):
    seen = []
    original = Prepared.topology

    def spy(self, lam):
        seen.append(lam)
        return original(self, lam)

    monkeypatch.setattr(Prepared, "topology", spy)
    examples = generate_synthetic(2, 20, seed=5)
    result = train(TrainConfig(**TINY, epochs=1, batch_size=2), examples)
    assert seen and set(seen) == {0.5}
    seen.clear()
    evaluate(result.model, examples, result.vocab)
    assert set(seen) == {0.05}


@pytest.mark.filterwarnings("ignore:overflow")
def test_non_finite_loss_names_the_batch(monkeypatch):
    monkeypatch.setattr("gqa.harness.training.loss", lambda *a: ops.mul(Tensor(1e200), Tensor(1e200)))
    with pytest.raises(TrainingError, match=r"batch 1:0"):
        train(TrainConfig(**TINY, epochs=1), generate_synthetic(2, 20, seed=6))


def test_unlocatable_answers_are_skipped(caplog):
    good = generate_synthetic(2, 20, seed=7)
    ex = good[0]
    bad = Example("bad", ex.question, ex.documents, "zzz", "span", ex.gold_supporting)
    result = train(TrainConfig(**TINY, epochs=1), good + [bad])
    assert result.skipped == ["bad"]
    assert "bad" in caplog.text


def test_training_needs_examples():
    with pytest.raises(ContractError):
        train(TrainConfig(**TINY))


# Checkpoints ---------------------------------------------------------------------------------

@pytest.fixture
def mini_ckpt():
    ex = mini_example()
    return Checkpoint(GQAModel(MINI_CONFIG, seed=9), mini_vocab([ex]), 0.5, 0.05), ex


def test_checkpoint_round_trip(mini_ckpt, tmp_path):
    ckpt, ex = mini_ckpt
    path = tmp_path / "m.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path, expected=MINI_CONFIG)
    for (n1, a), (n2, b) in zip(ckpt.model.named_parameters(), loaded.model.named_parameters()):
        assert n1 == n2 and a.data.tobytes() == b.data.tobytes()
    assert loaded.vocab.embeddings.tobytes() == ckpt.vocab.embeddings.tobytes()
    assert (loaded.lambda_train, loaded.lambda_test) == (0.5, 0.05)
    assert dumps_checkpoint(loaded) == path.read_bytes()
    before = evaluate(ckpt, [ex]).records
    assert evaluate(loaded, [ex]).records == before


def test_checkpoint_rejects_dimension_mismatch(mini_ckpt):
    raw = dumps_checkpoint(mini_ckpt[0])
    other = ModelConfig(emb_dim=4, char_emb_dim=2, char_dim=2, hidden=3, ggnn_steps=2)
    with pytest.raises(CheckpointError, match="hidden"):
        loads_checkpoint(raw, expected=other)


def test_checkpoint_rejects_corruption(mini_ckpt):
    raw = dumps_checkpoint(mini_ckpt[0])
    with pytest.raises(CheckpointError, match="magic"):
        loads_checkpoint(b"NOPE" + raw[4:])
    with pytest.raises(CheckpointError, match="truncated"):
        loads_checkpoint(raw[:-9])
    with pytest.raises(CheckpointError, match="trailing"):
        loads_checkpoint(raw + b"\0" * 8)


# Command line --------------------------------------------------------------------------------

def test_gen_data_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen-data", "--n", "32", "--seed", "7", "--out", str(a)]) == 0
    assert main(["gen-data", "--n", "32", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_train_eval_predict(tmp_path, capsys):
    data = tmp_path / "d.json"
    main(["gen-data", "--n", "4", "--seed", "1", "--vocab-size", "20", "--out", str(data)])
    cfg = tmp_path / "run.cfg"
    cfg.write_text("emb_dim = 4\nchar_emb_dim = 2\nchar_dim = 2\nhidden = 2\nsteps = 1\nepochs = 3\n")
    ckdir = tmp_path / "ck"
    code = main(["train", "--config", str(cfg), "--epochs", "1", "--train", str(data), "--checkpoint-dir", str(ckdir)])
    assert code == 0
    assert len(json.loads(capsys.readouterr().out)["epochs"]) == 1
    ckpt = str(ckdir / "epoch-001.ckpt")

    assert main(["eval", "--checkpoint", ckpt, "--data", str(data)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == set(METRIC_KEYS)

    assert main(["predict", "--checkpoint", ckpt, "--data", str(data), "--index", "1"]) == 0
    pred = json.loads(capsys.readouterr().out)
    assert len(pred["type_logits"]) == 3 and "decoded" in pred


def test_inspect_topology_single_sentence(tmp_path, capsys):
    ex = Example("one", ("is", "x", "?"), (Document("d", (("x", "y"),)),), "yes", "yes", frozenset({(0, 0)}))
    path = tmp_path / "one.json"
    save_hotpot_json([ex], path)
    assert main(["inspect-topology", "--data", str(path), "--emb-dim", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["M"] == [[0.0]]


def test_cli_errors_go_to_stderr(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt"), "--data", "x.json"]) == 1
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["train", "--no-such-flag"])
    assert exc.value.code != 0
    assert "unrecognized" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["show-config", "--config", str(bad)]) == 1
    assert "colour" in capsys.readouterr().err


def test_cli_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 3\nlambda_train = 0.7\n")
    assert main(["show-config", "--config", str(cfg), "--seed", "11"]) == 0
    values = parse_config_text(capsys.readouterr().out)
    assert values["seed"] == 11 and values["lambda_train"] == 0.7 and values["lambda_test"] == 0.05


def test_cli_params_report(capsys):
    assert main(["params", "--emb-dim", "4", "--char-emb-dim", "2", "--char-dim", "2", "--hidden", "2", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    cfg = ModelConfig(emb_dim=4, char_emb_dim=2, char_dim=2, hidden=2, ggnn_steps=3)
    assert report["total"] == GQAModel(cfg).num_parameters()
