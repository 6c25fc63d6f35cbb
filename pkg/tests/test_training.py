"""Training loop plumbing: config handling, run artifacts, failure modes."""

import json
import os

import numpy as np
import pytest

from leveltrace import sessionlog, tilegrid
from leveltrace.errors import ConfigError, NumericFailure
from leveltrace.training import (
    CORPUS_FILE,
    FINGERPRINT_FILE,
    TRAIN_LOG_FILE,
    TrainConfig,
    corpus_digest,
    load_artifacts,
    load_train_config,
    save_artifacts,
    train_model,
    training_fingerprint,
)


class TestTrainConfig:
    def test_from_dict_round_trips(self):
        cfg = TrainConfig(width=8, height=7, epochs=3, lr=1e-3, seed=42)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_keys_are_refused(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            TrainConfig.from_dict({"width": 8, "motifs": ["pipe_field"]})

    def test_partial_dict_fills_defaults(self):
        cfg = TrainConfig.from_dict({"width": 8, "height": 7})
        assert cfg.epochs == TrainConfig().epochs
        assert cfg.lr == TrainConfig().lr

    def test_config_file_must_hold_an_object(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("[1, 2, 3]\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_train_config(str(path))

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_train_config(str(tmp_path / "nope.json"))


class TestFingerprint:
    def test_stable_for_same_inputs(self, tiny_corpus):
        cfg = TrainConfig(width=8, height=7, epochs=3)
        a = training_fingerprint(cfg, tiny_corpus.sessions)
        b = training_fingerprint(cfg, tiny_corpus.sessions)
        assert a == b
        assert len(a) == 64

    def test_sensitive_to_config_and_corpus(self, tiny_corpus):
        cfg = TrainConfig(width=8, height=7, epochs=3)
        base = training_fingerprint(cfg, tiny_corpus.sessions)
        other_cfg = TrainConfig(width=8, height=7, epochs=3, seed=99)
        assert training_fingerprint(other_cfg, tiny_corpus.sessions) != base
        assert (
            training_fingerprint(cfg, tiny_corpus.sessions[:-1]) != base
        )

    def test_corpus_digest_tracks_serialized_text(self, tiny_corpus):
        a = corpus_digest(tiny_corpus.sessions)
        b = corpus_digest(list(tiny_corpus.sessions))
        assert a == b

    def test_fingerprint_is_stamped_everywhere(self, tiny_run):
        assert tiny_run.params.fingerprint == tiny_run.fingerprint
        assert tiny_run.mrin.fingerprint == tiny_run.fingerprint


class TestTrainModelGuards:
    def test_grid_size_must_match_config(self, tiny_corpus):
        cfg = TrainConfig(width=12, height=11, epochs=1)
        with pytest.raises(ConfigError, match="corpus grids are 8x7"):
            train_model(tiny_corpus.sessions, cfg)

    def test_epochs_must_be_positive(self, tiny_corpus):
        cfg = TrainConfig(width=8, height=7, epochs=0)
        with pytest.raises(ConfigError, match="epochs"):
            train_model(tiny_corpus.sessions, cfg)

    def test_runaway_lr_fails_loudly(self, tiny_corpus):
        # Adam's per-step movement is bounded by lr, so an insane lr inflates
        # the loss polynomially without ever reaching inf.  The ceiling still
        # has to catch it within the first epoch.
        cfg = TrainConfig(width=8, height=7, epochs=1, lr=1e6)
        with pytest.raises(NumericFailure, match="diverged"):
            train_model(tiny_corpus.sessions[:2], cfg)

    def test_epoch_losses_one_per_epoch(self, tiny_run):
        assert len(tiny_run.epoch_losses) == 3
        assert all(np.isfinite(x) for x in tiny_run.epoch_losses)


class TestArtifacts:
    def test_round_trip_is_exact(self, tiny_run, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        save_artifacts(tiny_run, str(out), tiny_corpus.sessions)
        params, mrin, sessions = load_artifacts(str(out))

        for (name, saved), (_, orig) in zip(
            params.arrays(), tiny_run.params.arrays()
        ):
            assert np.array_equal(saved, orig), name
        assert params.fingerprint == tiny_run.fingerprint
        for saved, orig in zip(mrin.arrays, tiny_run.mrin.arrays):
            assert np.array_equal(saved, orig)
        assert mrin.instance_sessions == tiny_run.mrin.instance_sessions

        assert len(sessions) == len(tiny_corpus.sessions)
        for loaded, orig in zip(sessions, tiny_corpus.sessions):
            assert loaded.session_id == orig.session_id
            assert tilegrid.render_text_level(
                loaded.final_level
            ) == tilegrid.render_text_level(orig.final_level)

    def test_run_directory_contents(self, tiny_run, tiny_corpus, tmp_path):
        out = tmp_path / "run"
        save_artifacts(tiny_run, str(out), tiny_corpus.sessions)

        fingerprint = (out / FINGERPRINT_FILE).read_text(encoding="utf-8")
        assert fingerprint.strip() == tiny_run.fingerprint

        log_lines = (out / TRAIN_LOG_FILE).read_text(encoding="utf-8").splitlines()
        assert len(log_lines) == len(tiny_run.epoch_losses)
        for epoch, line in enumerate(log_lines):
            entry = json.loads(line)
            assert entry == {"epoch": epoch, "mean_loss": tiny_run.epoch_losses[epoch]}

        corpus = sessionlog.load_sessions(str(out / CORPUS_FILE))
        assert [s.session_id for s in corpus] == [
            s.session_id for s in tiny_corpus.sessions
        ]

    def test_rerun_writes_identical_bytes(self, tiny_run, tiny_corpus, tmp_path):
        save_artifacts(tiny_run, str(tmp_path / "a"), tiny_corpus.sessions)
        save_artifacts(tiny_run, str(tmp_path / "b"), tiny_corpus.sessions)
        for name in sorted(os.listdir(tmp_path / "a")):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, name


class TestSingleSessionCorpus:
    def test_only_candidate_is_always_responsible(self, tiny_corpus):
        from leveltrace.attribution import explain

        solo = [tiny_corpus.sessions[0]]
        cfg = TrainConfig(width=8, height=7, epochs=1, seed=4)
        run = train_model(solo, cfg)
        assert set(run.mrin.instance_sessions.values()) == {solo[0].session_id}

        result = explain(
            run.params, run.mrin, solo, solo[0].final_level
        )
        assert result.session_id == solo[0].session_id
        assert tilegrid.render_text_level(
            result.responsible_level
        ) == tilegrid.render_text_level(solo[0].final_level)
