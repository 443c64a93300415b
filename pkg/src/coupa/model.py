"""End-to-end model: feature pipeline, forward pass, joint loss, training.

Raw ids are looked up in embedding tables (one reserved out-of-vocabulary
row each), concatenated, and passed through small MLP heads to produce
the four feature blocks: user profile, item profile (item id + category),
context (hour of day, day of week) and position-related features (pooled
click-position history plus the target item id). The behavior history and
target item form the temporal sequence matrix whose attention readout,
together with the user block and the elapsed time since the user's last
click, drives the point-process rate; the same readout joins the user and
context blocks to feed the position-uplift tower.

The joint objective is click cross-entropy over all samples plus a
weighted point-process term over clicked samples (negative log rate of
the observed item plus the cumulative non-event mass of sampled negative
items over the same elapsed window) plus an L2 prior over all parameters.

Training is plain mini-batch Adam under a fixed seed; with the same seed
and data the checkpoint bytes are identical run to run. Serving-time
scoring ("predict") fixes the position to 0 because the displayed
position is posterior information; samples with an empty click history
skip the point-process term but still produce a click probability.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn_core as nc
from . import point_process as pp
from . import position_debias as pd
from . import temporal_attention as ta
from . import time_encoding as te
from .data_synth import DatasetSplit, Sample, Vocabulary

ABLATE_NONE = "none"
ABLATE_TIME = "time-encoding"
ABLATE_POSITION = "position-module"


@dataclass
class ModelConfig:
    embed_dim: int = 8
    feature_dim: int = 16
    attn_dim: int = 32
    mlp_sizes: tuple[int, ...] = (256, 128, 64)
    n_experts: int = 4
    expert_width: int = 32
    n_positions: int = 10                 # position indices 0..n_positions-1
    max_history: int = 50
    monotone_hidden: tuple[int, ...] = (64, 64)
    rate_floor: float = 1e-8
    time_frequencies: tuple[float, ...] = te.DEFAULT_FREQUENCIES_SECONDS
    time_harmonics: int = te.DEFAULT_HARMONICS
    time_learnable: bool = True
    time_coefficient_init: float = 0.25   # kernel weight per harmonic at start
    ablate: str = ABLATE_NONE
    seed: int = 0

    def __post_init__(self):
        if self.ablate not in (ABLATE_NONE, ABLATE_TIME, ABLATE_POSITION):
            raise ValueError(f"unknown ablation {self.ablate!r}")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 256
    epochs: int = 20
    negatives_per_positive: int = 5
    temporal_weight: float = 1.0          # weight of the point-process term
    l2: float = 1e-6                      # parameter prior strength
    grad_clip: float | None = 10.0        # global gradient-norm cap per step
    seed: int = 0


@dataclass
class FeatureEmbeddings:
    user: np.ndarray
    item: np.ndarray
    context: np.ndarray
    position: np.ndarray


@dataclass
class ForwardResult:
    click_prob: float
    rate: float | None                    # None when the history is empty
    summary: np.ndarray                   # behavior readout h
    logits: np.ndarray                    # one score logit per position


@dataclass
class Batch:
    user_idx: np.ndarray
    item_idx: np.ndarray
    cat_idx: np.ndarray
    pos_k: np.ndarray
    hour_idx: np.ndarray
    dow_idx: np.ndarray
    labels: np.ndarray
    hist_item: np.ndarray                 # (B, N) padded with the OOV row
    hist_cat: np.ndarray
    hist_pos: np.ndarray
    hist_dt: np.ndarray                   # elapsed seconds, 0 on padding
    hist_mask: np.ndarray                 # (B, N) 1 for real rows
    tau_seconds: np.ndarray               # since the user's last click; 0 if none
    has_history: np.ndarray               # bool (B,)

    @property
    def size(self) -> int:
        return len(self.user_idx)


class CoupaModel:
    """Owns the parameter dictionary and builds forward/loss graphs."""

    def __init__(self, config: ModelConfig, vocabulary: Vocabulary,
                 params: dict[str, nc.Parameter] | None = None):
        self.config = config
        self.vocabulary = vocabulary
        self.user_index = {u: i + 1 for i, u in enumerate(vocabulary.user_ids)}
        self.item_index = {v: i + 1 for i, v in enumerate(vocabulary.item_ids)}
        self.cat_index = {c: i + 1 for i, c in enumerate(vocabulary.category_ids)}
        self.params: dict[str, nc.Parameter] = {}
        self.checkpoint_config: dict = {}
        self._build_parameters()
        if params is not None:
            for name, p in self.params.items():
                if name not in params:
                    raise ValueError(f"checkpoint is missing parameter {name}")
                if params[name].data.shape != p.data.shape:
                    raise ValueError(f"shape mismatch for {name}")
                p.data[...] = params[name].data

    # ------------------------------------------------------------------
    # parameters
    # ------------------------------------------------------------------

    def _emb(self, rng, name: str, rows: int) -> nc.Parameter:
        p = nc.Parameter(name, nc.init_uniform(rng, (rows, self.config.embed_dim),
                                               self.config.embed_dim))
        self.params[name] = p
        return p

    def _dense(self, rng, name: str, d_in: int, d_out: int) -> tuple[nc.Parameter, nc.Parameter]:
        w = nc.Parameter(f"{name}.w", nc.init_uniform(rng, (d_in, d_out), d_in))
        b = nc.Parameter(f"{name}.b", np.zeros(d_out))
        self.params[w.name] = w
        self.params[b.name] = b
        return w, b

    def _build_parameters(self) -> None:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        fd = cfg.feature_dim

        self.emb_user = self._emb(rng, "emb.user", len(self.user_index) + 1)
        self.emb_item = self._emb(rng, "emb.item", len(self.item_index) + 1)
        self.emb_cat = self._emb(rng, "emb.category", len(self.cat_index) + 1)
        self.emb_pos = self._emb(rng, "emb.position", cfg.n_positions + 1)
        self.emb_hour = self._emb(rng, "emb.hour", 24)
        self.emb_dow = self._emb(rng, "emb.dow", 7)

        e = cfg.embed_dim
        self.user_head = [self._dense(rng, "head.user.0", e, fd),
                          self._dense(rng, "head.user.1", fd, fd)]
        self.item_head = [self._dense(rng, "head.item.0", 2 * e, fd),
                          self._dense(rng, "head.item.1", fd, fd)]
        self.context_head = [self._dense(rng, "head.context.0", 2 * e, fd),
                             self._dense(rng, "head.context.1", fd, fd)]
        self.position_head = [self._dense(rng, "head.position.0", 2 * e, fd),
                              self._dense(rng, "head.position.1", fd, fd)]

        coeff = [[cfg.time_coefficient_init] * (cfg.time_harmonics + 1)
                 for _ in cfg.time_frequencies]
        self.time_config = te.TimeEncodingConfig(frequencies=cfg.time_frequencies,
                                                 harmonics=cfg.time_harmonics,
                                                 learnable=cfg.time_learnable,
                                                 coefficients=coeff)
        self.encoder = te.TimeEncoder(self.time_config, self.params,
                                      disabled=cfg.ablate == ABLATE_TIME)

        row_width = fd + self.time_config.dim
        self.attention = ta.init_attention_params(rng, row_width, cfg.attn_dim, self.params)

        tower_in = 2 * fd + cfg.attn_dim
        self.tower: list[tuple[nc.Parameter, nc.Parameter]] = []
        d = tower_in
        for i, width in enumerate(cfg.mlp_sizes):
            self.tower.append(self._dense(rng, f"tower.{i}", d, width))
            d = width

        if cfg.ablate == ABLATE_POSITION:
            self.flat_head = self._dense(rng, "flat_head", d, 1)
            self.mmoe = None
            self.glu = None
        else:
            self.flat_head = None
            self.mmoe = pd.init_mmoe_params(rng, d, cfg.n_experts, cfg.expert_width,
                                            cfg.n_positions, self.params)
            self.glu = pd.init_glu_params(rng, fd, cfg.n_positions, self.params)

        self.monotone = pp.init_monotone_net(rng, fd + cfg.attn_dim + 1,
                                             cfg.monotone_hidden, self.params)
        self._l2_exempt = {"time_enc.periods"}

        # the cumulative-intensity net's weights start at 1/fan scale while
        # full-rate Adam moves each coordinate by the learning rate per step;
        # the sampled non-event term would otherwise shove the whole net
        # onto the (gradient-dead) projection wall within one epoch
        for w, b in zip(self.monotone.weights, self.monotone.biases):
            w.lr_scale = 0.1
            b.lr_scale = 0.1

        if self.mmoe is not None:
            # the shared bias anchors the raw uplifts away from the zero
            # tie state; let the gates, not the anchor, absorb the
            # downward calibration pressure of sparse clicks
            self.mmoe.bias.lr_scale = 0.05

    def parameters(self) -> list[nc.Parameter]:
        return list(self.params.values())

    # ------------------------------------------------------------------
    # batching
    # ------------------------------------------------------------------

    def _uid(self, user_id: int) -> int:
        return self.user_index.get(user_id, 0)

    def _iid(self, item_id: int) -> int:
        return self.item_index.get(item_id, 0)

    def _cid(self, category_id: int) -> int:
        return self.cat_index.get(category_id, 0)

    def make_batch(self, samples: list[Sample], force_position: int | None = None) -> Batch:
        cfg = self.config
        n = len(samples)
        max_hist = max((min(len(s.history), cfg.max_history) for s in samples), default=0)
        max_hist = max(max_hist, 1)

        user_idx = np.zeros(n, dtype=np.int64)
        item_idx = np.zeros(n, dtype=np.int64)
        cat_idx = np.zeros(n, dtype=np.int64)
        pos_k = np.zeros(n, dtype=np.int64)
        hour_idx = np.zeros(n, dtype=np.int64)
        dow_idx = np.zeros(n, dtype=np.int64)
        labels = np.zeros(n)
        hist_item = np.zeros((n, max_hist), dtype=np.int64)
        hist_cat = np.zeros((n, max_hist), dtype=np.int64)
        hist_pos = np.zeros((n, max_hist), dtype=np.int64)
        hist_dt = np.zeros((n, max_hist))
        hist_mask = np.zeros((n, max_hist))
        tau_seconds = np.zeros(n)
        has_history = np.zeros(n, dtype=bool)

        for i, s in enumerate(samples):
            if force_position is None and not 0 <= s.position < cfg.n_positions:
                raise ValueError(f"sample position {s.position} outside 0..{cfg.n_positions - 1}")
            user_idx[i] = self._uid(s.user_id)
            item_idx[i] = self._iid(s.item_id)
            cat_idx[i] = self._cid(s.category_id)
            pos_k[i] = s.position if force_position is None else force_position
            hour_idx[i] = (s.timestamp // 3600) % 24
            dow_idx[i] = (s.timestamp // 86_400) % 7
            labels[i] = s.label
            hist = s.history[-cfg.max_history:]
            for j, e in enumerate(hist):
                if e.timestamp >= s.timestamp:
                    raise ValueError("history event does not precede the sample time")
                hist_item[i, j] = self._iid(e.item_id)
                hist_cat[i, j] = self._cid(e.category_id)
                hist_pos[i, j] = e.position + 1 if 0 <= e.position < cfg.n_positions else 0
                hist_dt[i, j] = s.timestamp - e.timestamp
                hist_mask[i, j] = 1.0
            if hist:
                has_history[i] = True
                tau_seconds[i] = s.timestamp - hist[-1].timestamp
        return Batch(user_idx, item_idx, cat_idx, pos_k, hour_idx, dow_idx, labels,
                     hist_item, hist_cat, hist_pos, hist_dt, hist_mask,
                     tau_seconds, has_history)

    # ------------------------------------------------------------------
    # graph building
    # ------------------------------------------------------------------

    def _head(self, layers, x: nc.Tensor) -> nc.Tensor:
        (w0, b0), (w1, b1) = layers
        h = nc.relu(nc.add(nc.matmul(x, w0), b0))
        return nc.add(nc.matmul(h, w1), b1)

    def _item_block(self, item_idx: np.ndarray, cat_idx: np.ndarray) -> nc.Tensor:
        raw = nc.concat([nc.gather_rows(self.emb_item, item_idx),
                         nc.gather_rows(self.emb_cat, cat_idx)], axis=-1)
        return self._head(self.item_head, raw)

    def _feature_blocks(self, batch: Batch) -> dict[str, nc.Tensor]:
        e_user = self._head(self.user_head, nc.gather_rows(self.emb_user, batch.user_idx))
        e_item = self._item_block(batch.item_idx, batch.cat_idx)
        context = self._head(self.context_head,
                             nc.concat([nc.gather_rows(self.emb_hour, batch.hour_idx),
                                        nc.gather_rows(self.emb_dow, batch.dow_idx)], axis=-1))
        mask = batch.hist_mask[:, :, None]
        pos_raw = nc.mul(nc.gather_rows(self.emb_pos, batch.hist_pos), nc.Tensor(mask))
        counts = np.maximum(batch.hist_mask.sum(axis=1, keepdims=True), 1.0)
        pooled = nc.mul(nc.tsum(pos_raw, axis=1), nc.Tensor(1.0 / counts))
        position = self._head(self.position_head,
                              nc.concat([pooled, nc.gather_rows(self.emb_item, batch.item_idx)],
                                        axis=-1))
        return {"user": e_user, "item": e_item, "context": context, "position": position}

    def _history_rows(self, batch: Batch) -> nc.Tensor:
        """(B, N, row_width) encoded behavior rows (padded rows carry junk
        that the attention mask removes)."""
        items = self._item_block(batch.hist_item, batch.hist_cat)
        encodings = self.encoder.encode_intervals(batch.hist_dt)
        return nc.concat([items, encodings], axis=-1)

    def _target_row(self, e_item: nc.Tensor, n: int) -> nc.Tensor:
        zero_enc = self.encoder.encode_intervals(np.zeros(n))
        row = nc.concat([e_item, zero_enc], axis=-1)
        return nc.reshape(row, (n, 1, row.shape[-1]))

    def _summaries(self, history_rows: nc.Tensor, target_rows: nc.Tensor,
                   hist_mask: np.ndarray) -> nc.Tensor:
        """Attention readout of the target row over history + target."""
        z = nc.concat([history_rows, target_rows], axis=1)
        n = z.shape[0]
        key_mask = np.concatenate([hist_mask, np.ones((n, 1))], axis=1)
        out = ta.attend_graph(z, self.attention, key_mask=key_mask)
        return nc.take(out, (slice(None), -1, slice(None)))

    def _tower_out(self, e_user, context, summary) -> nc.Tensor:
        x = nc.concat([e_user, context, summary], axis=-1)
        for w, b in self.tower:
            x = nc.relu(nc.add(nc.matmul(x, w), b))
        return x

    def _position_logits(self, x: nc.Tensor, position_feats: nc.Tensor) -> nc.Tensor:
        raw = pd.mmoe_uplifts_graph(x, self.mmoe)
        delta = pd.glu_graph(raw, position_feats, self.glu)
        return pd.position_logits_graph(delta)

    def _click_logits(self, batch: Batch, blocks, summary) -> nc.Tensor:
        """(B,) logit per sample at the batch's position index."""
        x = self._tower_out(blocks["user"], blocks["context"], summary)
        if self.config.ablate == ABLATE_POSITION:
            w, b = self.flat_head
            return nc.reshape(nc.add(nc.matmul(x, w), b), (batch.size,))
        mu = self._position_logits(x, blocks["position"])
        return nc.select_positions(mu, batch.pos_k)

    # ------------------------------------------------------------------
    # public surface
    # ------------------------------------------------------------------

    def embed_features(self, sample: Sample) -> FeatureEmbeddings:
        batch = self.make_batch([sample])
        blocks = self._feature_blocks(batch)
        return FeatureEmbeddings(user=blocks["user"].data[0].copy(),
                                 item=blocks["item"].data[0].copy(),
                                 context=blocks["context"].data[0].copy(),
                                 position=blocks["position"].data[0].copy())

    def forward(self, sample: Sample) -> ForwardResult:
        batch = self.make_batch([sample])
        blocks = self._feature_blocks(batch)
        summary = self._summaries(self._history_rows(batch),
                                  self._target_row(blocks["item"], 1), batch.hist_mask)
        x = self._tower_out(blocks["user"], blocks["context"], summary)
        if self.config.ablate == ABLATE_POSITION:
            w, b = self.flat_head
            logit = float(nc.add(nc.matmul(x, w), b).data[0, 0])
            logits = np.full(self.config.n_positions, logit)
            prob = pd.click_probability(logit)
        else:
            mu = self._position_logits(x, blocks["position"])
            logits = mu.data[0].copy()
            prob = pd.click_probability(logits[sample.position])
        rate = None
        if batch.has_history[0]:
            feats = nc.concat([blocks["user"], summary], axis=-1)
            lam = pp.rate_graph(self.monotone, feats,
                                batch.tau_seconds / pp.SECONDS_PER_HOUR)
            rate = max(float(lam.data[0]), 0.0)
        return ForwardResult(click_prob=prob, rate=rate,
                             summary=summary.data[0].copy(), logits=logits)

    def predict(self, sample: Sample) -> float:
        """Serving-time score: position fixed to 0, recorded position ignored."""
        return float(self.predict_scores([sample])[0])

    def score_samples(self, samples: list[Sample], batch_size: int = 512,
                      force_position: int | None = None) -> np.ndarray:
        """Click probabilities, at each sample's logged position by default."""
        out = np.zeros(len(samples))
        for lo in range(0, len(samples), batch_size):
            chunk = samples[lo:lo + batch_size]
            batch = self.make_batch(chunk, force_position=force_position)
            blocks = self._feature_blocks(batch)
            summary = self._summaries(self._history_rows(batch),
                                      self._target_row(blocks["item"], batch.size),
                                      batch.hist_mask)
            logits = self._click_logits(batch, blocks, summary)
            out[lo:lo + batch.size] = pd._sigmoid(logits.data)
        return out

    def predict_scores(self, samples: list[Sample], batch_size: int = 512) -> np.ndarray:
        return self.score_samples(samples, batch_size=batch_size, force_position=0)

    # ------------------------------------------------------------------
    # loss
    # ------------------------------------------------------------------

    def _draw_negatives(self, batch: Batch, rows: np.ndarray, n_neg: int,
                        rng: np.random.Generator) -> np.ndarray:
        """Uniform item indices over the known vocabulary, never equal to the
        positive item of the row. Shape (len(rows) * n_neg,)."""
        n_items = len(self.item_index)
        if n_items < 2:
            raise ValueError("negative sampling needs at least two known items")
        pos = batch.item_idx[rows]
        draws = rng.integers(1, n_items, size=(len(rows), n_neg))
        draws = draws + (draws >= pos[:, None])
        return draws.reshape(-1)

    def joint_loss(self, samples: list[Sample], train_cfg: TrainConfig,
                   rng: np.random.Generator | None = None,
                   negatives: np.ndarray | None = None) -> tuple[nc.Tensor, dict]:
        """Scalar loss node plus a breakdown of its (float) components."""
        if not samples:
            raise ValueError("joint_loss needs a non-empty batch")
        batch = self.make_batch(samples)
        blocks = self._feature_blocks(batch)
        history_rows = self._history_rows(batch)
        summary = self._summaries(history_rows, self._target_row(blocks["item"], batch.size),
                                  batch.hist_mask)
        logits = self._click_logits(batch, blocks, summary)

        # cross entropy from logits: softplus(z) - y * z
        labels = nc.Tensor(batch.labels)
        ce = nc.tsum(nc.sub(nc.softplus(logits), nc.mul(labels, logits)))

        parts = {"ce": ce.item(), "temporal": 0.0}
        loss = ce

        rows = np.flatnonzero((batch.labels > 0) & batch.has_history)
        if train_cfg.temporal_weight > 0 and rows.size:
            tau_hours = batch.tau_seconds[rows] / pp.SECONDS_PER_HOUR
            user_rows = nc.take(blocks["user"], (rows, slice(None)))
            summary_rows = nc.take(summary, (rows, slice(None)))
            feats = nc.concat([user_rows, summary_rows], axis=-1)
            lam = pp.rate_graph(self.monotone, feats, tau_hours)
            log_rate = nc.log(nc.add(lam, nc.Tensor(self.config.rate_floor)))
            temporal = nc.neg(nc.tsum(log_rate))

            n_neg = train_cfg.negatives_per_positive
            if n_neg > 0:
                if negatives is None:
                    if rng is None:
                        raise ValueError("negative sampling needs an rng or explicit ids")
                    negatives = self._draw_negatives(batch, rows, n_neg, rng)
                rep = np.repeat(rows, n_neg)
                neg_cat = self._item_category_index[negatives] \
                    if self._item_category_index is not None else np.zeros_like(negatives)
                neg_block = self._item_block(negatives, neg_cat)
                hist_rep = nc.take(history_rows, (rep, slice(None), slice(None)))
                target_rep = self._target_row(neg_block, len(rep))
                neg_summary = self._summaries(hist_rep, target_rep, batch.hist_mask[rep])
                neg_feats = nc.concat([nc.take(blocks["user"], (rep, slice(None))),
                                       neg_summary], axis=-1)
                psi = pp.anchored_cumulative_graph(self.monotone, neg_feats,
                                                   batch.tau_seconds[rep] / pp.SECONDS_PER_HOUR)
                temporal = nc.add(temporal, nc.tsum(psi))
            parts["temporal"] = temporal.item()
            loss = nc.add(loss, nc.scale(temporal, train_cfg.temporal_weight))

        if train_cfg.l2 > 0:
            reg = None
            for name, p in self.params.items():
                if name in self._l2_exempt:
                    continue  # raw period scales (seconds); shrinking them is not a prior
                term = nc.tsum(nc.square(p))
                reg = term if reg is None else nc.add(reg, term)
            parts["l2"] = train_cfg.l2 * reg.item()
            loss = nc.add(loss, nc.scale(reg, train_cfg.l2))

        parts["total"] = loss.item()
        return loss, parts

    # item index -> category index map used only for negative sampling
    _item_category_index: np.ndarray | None = None

    def set_item_categories(self, events) -> None:
        table = np.zeros(len(self.item_index) + 1, dtype=np.int64)
        for e in events:
            table[self._iid(e.item_id)] = self._cid(e.category_id)
        self._item_category_index = table

    # ------------------------------------------------------------------
    # training
    # ------------------------------------------------------------------

    def train(self, split: DatasetSplit, train_cfg: TrainConfig,
              checkpoint_path: str | None = None,
              log_path: str | None = None,
              extra_config: dict | None = None) -> list[dict]:
        from .metrics import ScoredLabel, gauc

        self.set_item_categories(split.events)
        plist = self.parameters()
        opt = nc.Adam(plist, lr=train_cfg.learning_rate, grad_clip=train_cfg.grad_clip)
        rng = np.random.default_rng(train_cfg.seed)
        trace: list[dict] = []
        log_lines: list[str] = []

        for epoch in range(train_cfg.epochs):
            order = rng.permutation(len(split.train))
            total, count = 0.0, 0
            for bi, lo in enumerate(range(0, len(order), train_cfg.batch_size)):
                chunk = [split.train[i] for i in order[lo:lo + train_cfg.batch_size]]
                nc.zero_grads(plist)
                loss, parts = self.joint_loss(chunk, train_cfg, rng=rng)
                if not np.isfinite(parts["total"]):
                    raise nc.NumericFault(f"non-finite loss in epoch {epoch} batch {bi}")
                loss.backward()
                opt.step()
                total += parts["total"]
                count += len(chunk)
            val_gauc = float("nan")
            if split.validation:
                scores = self.score_samples(split.validation)
                val_gauc = gauc([ScoredLabel(s.user_id, float(p), s.label)
                                 for s, p in zip(split.validation, scores)])
            record = {"epoch": epoch, "train_loss": total / max(count, 1),
                      "val_gauc": val_gauc}
            trace.append(record)
            log_lines.append(f"{epoch}\t{record['train_loss']!r}\t{record['val_gauc']!r}")
            if checkpoint_path:
                self.save(checkpoint_path, extra_config=extra_config)
            if log_path:
                with open(log_path, "w", encoding="utf-8") as fh:
                    fh.write("epoch\ttrain_loss\tval_gauc\n")
                    fh.write("\n".join(log_lines) + "\n")
        return trace

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    def save(self, path: str, extra_config: dict | None = None) -> None:
        config = {
            "model": {**asdict(self.config),
                      "mlp_sizes": list(self.config.mlp_sizes),
                      "monotone_hidden": list(self.config.monotone_hidden),
                      "time_frequencies": list(self.config.time_frequencies)},
            "vocabulary": {"user_ids": self.vocabulary.user_ids,
                           "item_ids": self.vocabulary.item_ids,
                           "category_ids": self.vocabulary.category_ids},
        }
        if extra_config:
            config.update(extra_config)
        nc.save_checkpoint(path, self.parameters(), config)

    @classmethod
    def load(cls, path: str) -> "CoupaModel":
        params, config = nc.load_checkpoint(path)
        m = config["model"]
        model_cfg = ModelConfig(
            embed_dim=m["embed_dim"], feature_dim=m["feature_dim"], attn_dim=m["attn_dim"],
            mlp_sizes=tuple(m["mlp_sizes"]), n_experts=m["n_experts"],
            expert_width=m["expert_width"], n_positions=m["n_positions"],
            max_history=m["max_history"], monotone_hidden=tuple(m["monotone_hidden"]),
            rate_floor=m["rate_floor"], time_frequencies=tuple(m["time_frequencies"]),
            time_harmonics=m["time_harmonics"], time_learnable=m["time_learnable"],
            time_coefficient_init=m.get("time_coefficient_init", 0.25),
            ablate=m["ablate"], seed=m["seed"])
        vocab = Vocabulary(user_ids=config["vocabulary"]["user_ids"],
                           item_ids=config["vocabulary"]["item_ids"],
                           category_ids=config["vocabulary"]["category_ids"])
        model = cls(model_cfg, vocab, params=params)
        model.checkpoint_config = config
        return model
