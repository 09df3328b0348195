"""The policy: two masked transformers over gate and move sequences, a mean
readout over their trap rows, per-cell logits with a static preference bias,
and a value head on the pooled unmasked cells.

Forward passes run over query batches (one query = an observation, the atom
about to decide, and the moves already planned); PPO updates push every
decision of a minibatch through two encoder calls."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import torch
from torch import nn

from .features import (
    StaticFeatures,
    TrapEmbedding,
    board_one_hot,
    build_attention_mask,
    gates_chunk_input,
    moves_input,
    occupancy_mask,
    select_chunks,
)


class Query(NamedTuple):
    """One policy/value evaluation point."""

    obs: dict
    q0: int
    plan: dict


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ValueError("embedding dim must divide evenly across heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, mask: torch.Tensor):
        """x: (B, S, D); mask: additive (B, S, S) or (S, S).
        Returns (out, attention weights (B, H, S, S))."""
        b, s, d = x.shape
        qkv = self.qkv(x).reshape(b, s, 3, self.heads, self.head_dim)
        q, k, v = (qkv[:, :, i].transpose(1, 2) for i in range(3))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if mask.dim() == 2:
            mask = mask.unsqueeze(0)
        scores = scores + mask.unsqueeze(1)
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, s, d)
        return self.proj(out), attn


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int = 2):
        super().__init__()
        self.attn = MultiHeadAttention(dim, heads)
        self.norm1 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim), nn.GELU(), nn.Linear(mlp_ratio * dim, dim),
        )
        self.norm2 = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor, mask: torch.Tensor):
        h, attn = self.attn(x, mask)
        x = self.norm1(x + h)
        x = self.norm2(x + self.mlp(x))
        return x, attn


class MaskedEncoder(nn.Module):
    """Stack of blocks sharing one attention mask."""

    def __init__(self, dim: int, layers: int, heads: int):
        super().__init__()
        self.blocks = nn.ModuleList(EncoderBlock(dim, heads) for _ in range(layers))

    def forward(self, x: torch.Tensor, mask: torch.Tensor):
        attns = []
        for block in self.blocks:
            x, attn = block(x, mask)
            attns.append(attn)
        return x, attns


@dataclass
class ModelConfig:
    rows: int
    cols: int
    n_atoms: int = 0            # required unless transfer (no atom-id table there)
    embed_dim: int = 20
    layers: int = 3
    heads: int = 4
    time_dim: int = 40
    atom_dim: int = 40
    board_dim: int = 10
    mixer_depth: int = 1
    t_max: int = 512
    horizon: int = 5            # chunks fed to the gates transformer
    head_hidden: int = 32
    transfer: bool = False      # dynamic features only, factorized trap tables

    def __post_init__(self):
        if not self.transfer and self.n_atoms < 1:
            raise ValueError("fixed-grid mode needs n_atoms")


class PolicyNetwork(nn.Module):
    """Maps (observation, acting atom, partial plan) to cell logits and a
    state value. In transfer mode the same weights serve any grid within the
    row/column caps and any atom count."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.gate_embed = TrapEmbedding(cfg.embed_dim, cfg.rows, cfg.cols, factorized=cfg.transfer)
        self.move_embed = TrapEmbedding(cfg.embed_dim, cfg.rows, cfg.cols, factorized=cfg.transfer)
        self.gates_encoder = MaskedEncoder(cfg.embed_dim, cfg.layers, cfg.heads)
        self.moves_encoder = MaskedEncoder(cfg.embed_dim, cfg.layers, cfg.heads)
        self.policy_head = nn.Sequential(
            nn.Linear(cfg.embed_dim, cfg.head_hidden), nn.GELU(), nn.Linear(cfg.head_hidden, 1),
        )
        self.value_head_f = nn.Sequential(
            nn.Linear(cfg.embed_dim, cfg.head_hidden), nn.GELU(), nn.Linear(cfg.head_hidden, 1),
        )
        if not cfg.transfer:
            self.static = StaticFeatures(
                cfg.n_atoms, cfg.rows, cfg.cols,
                time_dim=cfg.time_dim, atom_dim=cfg.atom_dim, board_dim=cfg.board_dim,
                mixer_depth=cfg.mixer_depth, t_max=cfg.t_max,
            )
            self.value_head_d = nn.Sequential(
                nn.Linear(cfg.rows * cfg.cols, cfg.head_hidden),
                nn.GELU(),
                nn.Linear(cfg.head_hidden, 1),
            )

    # -- feature plumbing -------------------------------------------------

    @staticmethod
    def _unpack(obs: dict) -> tuple[list, int, int]:
        positions = [tuple(p) for p in obs["positions"]]
        grid = obs["grid"]
        return positions, int(grid["rows"]), int(grid["cols"])

    def _check_grid(self, rows: int, cols: int, n_atoms: int) -> None:
        if self.cfg.transfer:
            if rows > self.cfg.rows or cols > self.cfg.cols:
                raise ValueError(f"grid {rows}x{cols} exceeds caps {self.cfg.rows}x{self.cfg.cols}")
        else:
            if (rows, cols) != (self.cfg.rows, self.cfg.cols):
                raise ValueError("fixed-grid model fed a different grid")
            if n_atoms != self.cfg.n_atoms:
                raise ValueError("fixed-grid model fed a different atom count")

    def _batch_readout(self, queries: list[Query]):
        """Readout f (B, n_grids, D) and legality (B, n_grids) for queries
        sharing one grid shape and atom count; two encoder calls total."""
        positions0, rows, cols = self._unpack(queries[0].obs)
        n_atoms = len(positions0)
        self._check_grid(rows, cols, n_atoms)
        n_grids = rows * cols

        moves_seqs, moves_masks, legal_rows = [], [], []
        gate_seqs, gate_masks, gate_owner = [], [], []
        for i, query in enumerate(queries):
            positions = [tuple(p) for p in query.obs["positions"]]
            seq_m, nz_m = moves_input(self.move_embed, positions, query.plan,
                                      query.q0, rows, cols)
            moves_seqs.append(seq_m)
            moves_masks.append(build_attention_mask(n_atoms, n_grids, nz_m))
            legal_rows.append(occupancy_mask(positions, query.plan, query.q0, rows, cols))
            for chunk in select_chunks(query.obs["chunks"], query.q0, self.cfg.horizon):
                seq_g, nz_g = gates_chunk_input(self.gate_embed, positions, query.plan,
                                                chunk, query.q0, rows, cols)
                gate_seqs.append(seq_g)
                gate_masks.append(build_attention_mask(n_atoms, n_grids, nz_g))
                gate_owner.append(i)

        out_m, _ = self.moves_encoder(torch.stack(moves_seqs), torch.stack(moves_masks))
        f_sum = out_m[:, n_atoms:, :]
        counts = torch.ones(len(queries))
        if gate_seqs:
            out_g, _ = self.gates_encoder(torch.stack(gate_seqs), torch.stack(gate_masks))
            owner = torch.tensor(gate_owner)
            f_sum = f_sum.index_add(0, owner, out_g[:, n_atoms:, :])
            counts = counts.index_add(0, owner, torch.ones(len(gate_owner)))
        f = f_sum / counts[:, None, None]
        return f, torch.stack(legal_rows)

    def _batch_static(self, queries: list[Query]) -> torch.Tensor:
        ts = torch.tensor([q.obs["t"] for q in queries])
        q0s = torch.tensor([q.q0 for q in queries])
        boards = torch.stack([
            board_one_hot([tuple(p) for p in q.obs["positions"]], q.plan,
                          self.cfg.n_atoms, self.cfg.rows, self.cfg.cols)
            for q in queries
        ])
        return self.static.forward_batch(ts, q0s, boards)

    def batch_policy_logits(self, queries: list[Query]) -> torch.Tensor:
        """(B, n_grids) logits; occupied cells are -inf."""
        f, legal = self._batch_readout(queries)
        w = self.policy_head(f).squeeze(-1)
        if not self.cfg.transfer:
            w = w + self._batch_static(queries)
        return w.masked_fill(~legal, float("-inf"))

    def batch_values(self, queries: list[Query]) -> torch.Tensor:
        """(B,) state values: pooled unmasked readout plus the static path."""
        f, legal = self._batch_readout(queries)
        weights = legal.unsqueeze(-1).to(f.dtype)
        pooled = (f * weights).sum(dim=1) / weights.sum(dim=1)
        v = self.value_head_f(pooled).squeeze(-1)
        if not self.cfg.transfer:
            v = v + self.value_head_d(self._batch_static(queries)).squeeze(-1)
        return v

    # -- single-query conveniences ------------------------------------------

    def policy_logits(self, obs: dict, q0: int, plan: dict) -> torch.Tensor:
        return self.batch_policy_logits([Query(obs, q0, plan)])[0]

    def value(self, obs: dict, q0: int, plan: dict) -> torch.Tensor:
        return self.batch_values([Query(obs, q0, plan)])[0]

    def dynamic_readout(self, obs: dict, q0: int, plan: dict,
                        collect_attention: bool = False):
        """Single-query readout; with collect_attention, also returns the
        (mask, per-layer attention) records for both transformers."""
        positions, rows, cols = self._unpack(obs)
        n_atoms = len(positions)
        self._check_grid(rows, cols, n_atoms)
        n_grids = rows * cols

        seq_m, nz_m = moves_input(self.move_embed, positions, plan, q0, rows, cols)
        mask_m = build_attention_mask(n_atoms, n_grids, nz_m)
        out_m, attn_m = self.moves_encoder(seq_m.unsqueeze(0), mask_m)
        outputs = [out_m[0, n_atoms:]]

        chunks = select_chunks(obs["chunks"], q0, self.cfg.horizon)
        attn_records = [("moves", mask_m, attn_m)]
        if chunks:
            seqs, masks = [], []
            for chunk in chunks:
                seq_g, nz_g = gates_chunk_input(
                    self.gate_embed, positions, plan, chunk, q0, rows, cols,
                )
                seqs.append(seq_g)
                masks.append(build_attention_mask(n_atoms, n_grids, nz_g))
            out_g, attn_g = self.gates_encoder(torch.stack(seqs), torch.stack(masks))
            outputs.extend(out_g[i, n_atoms:] for i in range(len(chunks)))
            attn_records.append(("gates", torch.stack(masks), attn_g))

        f = torch.stack(outputs).mean(dim=0)
        legal = occupancy_mask(positions, plan, q0, rows, cols)
        if collect_attention:
            return f, legal, attn_records
        return f, legal
