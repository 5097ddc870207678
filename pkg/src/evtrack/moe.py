"""Sparsity-routed expert FFN.

The standard FFN of selected blocks is partitioned along its hidden
dimension into three density-specific sub-experts while the full FFN is
retained as a shared expert. A small router picks one sub-expert per layer
from pooled template+search features; its output is added onto the shared
output over the selected density's token block only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .config import INJECTION_ORDER
from .nnops import gelu, global_avg_pool, gumbel_softmax, linear

if TYPE_CHECKING:
    from .backbone import TokenLayout


def ffn_forward(x: np.ndarray, w1: np.ndarray, b1: np.ndarray,
                w2: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Two-layer FFN with GELU; w1 is (D, H), w2 is (H, D)."""
    return linear(gelu(linear(x, w1, b1)), w2, b2)


@dataclass(frozen=True)
class ExpertSet:
    """Shared FFN plus its three hidden-dimension thirds.

    Expert i holds the i-th third of the hidden units (a column block of w1,
    the matching row block of w2) and an evenly shared output bias b2/3, so
    the expert outputs sum exactly to the shared FFN output.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        h = self.w1.shape[1]
        if h % 3:
            raise ValueError(f"hidden dim {h} not divisible by 3")
        if self.b1.shape != (h,) or self.w2.shape[0] != h:
            raise ValueError(
                f"inconsistent FFN shapes: w1{self.w1.shape}, b1{self.b1.shape}, w2{self.w2.shape}"
            )

    @property
    def hidden_third(self) -> int:
        return self.w1.shape[1] // 3

    def expert_params(self, i: int):
        """(w1_i, b1_i, w2_i, b2_star) for expert i in {0, 1, 2}."""
        if i not in (0, 1, 2):
            raise ValueError(f"expert index {i} outside 0..2")
        lo = i * self.hidden_third
        hi = lo + self.hidden_third
        return self.w1[:, lo:hi], self.b1[lo:hi], self.w2[lo:hi, :], self.b2 / 3.0

    def shared_forward(self, x: np.ndarray) -> np.ndarray:
        return ffn_forward(x, self.w1, self.b1, self.w2, self.b2)

    def expert_forward(self, i: int, x: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2 = self.expert_params(i)
        out = ffn_forward(x, w1, b1, w2, b2)
        # the partition already yields width-D outputs; the repetition-style
        # alignment path is unreachable by construction
        assert out.shape[-1] == x.shape[-1]
        return out


def split_ffn(w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray) -> ExpertSet:
    """Partition a shared FFN into the three-expert set."""
    return ExpertSet(w1, b1, w2, b2)


@dataclass(frozen=True)
class RoutingRecord:
    """One router decision: raw logits, the active slice, and the mask."""

    layer: int  # 1-based transformer layer
    logits: tuple[float, float, float]
    k: int
    mask: tuple[float, ...]
    selected_density: str

    def __post_init__(self):
        if len(self.mask) != self.k:
            raise ValueError(f"mask length {len(self.mask)} != K {self.k}")


@dataclass(frozen=True)
class RouterWeights:
    fc1_w: np.ndarray  # (2D, D)
    fc1_b: np.ndarray
    fc2_w: np.ndarray  # (D, 3)
    fc2_b: np.ndarray


def route(template_tokens: np.ndarray, search_blocks: list[np.ndarray],
          router: RouterWeights, k: int, layer: int, mode: str = "hard",
          rng: np.random.Generator | None = None, tau: float = 1.0) -> RoutingRecord:
    """Pick one density-specific expert from pooled features.

    The router input is GAP over the template tokens concatenated with GAP
    over all currently injected search tokens jointly. Only the first K
    logits (the injected densities, in injection order) are active. Hard
    mode is the deterministic zero-noise argmax used at inference; soft mode
    draws a Gumbel-softmax sample from the provided rng.
    """
    if not 1 <= k <= 3:
        raise ValueError(f"K must be in 1..3, got {k}")
    if len(search_blocks) != k:
        raise ValueError(f"got {len(search_blocks)} search blocks for K={k}")
    if any(block.shape[0] == 0 for block in search_blocks):
        raise ValueError("empty search block")
    if mode not in ("hard", "soft"):
        raise ValueError(f"mode must be 'hard' or 'soft', got {mode!r}")
    pooled_t = global_avg_pool(template_tokens)
    pooled_s = global_avg_pool(np.concatenate(search_blocks, axis=0))
    r_in = np.concatenate([pooled_t, pooled_s])
    logits = linear(gelu(linear(r_in, router.fc1_w, router.fc1_b)),
                    router.fc2_w, router.fc2_b)
    active = logits[:k]
    if mode == "hard":
        mask = gumbel_softmax(active, tau, rng=None, hard=True)
    else:
        mask = gumbel_softmax(active, tau, rng=rng, hard=False)
    selected = int(np.argmax(mask))
    return RoutingRecord(
        layer=layer,
        logits=tuple(float(v) for v in logits),
        k=k,
        mask=tuple(float(v) for v in mask),
        selected_density=INJECTION_ORDER[selected],
    )


def moe_forward(layout: "TokenLayout", tokens: np.ndarray, expert_set: ExpertSet,
                record: RoutingRecord) -> np.ndarray:
    """Shared FFN everywhere, plus the selected expert on its token block."""
    if record.selected_density not in layout.present_densities():
        raise ValueError(
            f"routing selected {record.selected_density!r}, "
            f"layout holds {layout.present_densities()}"
        )
    out = expert_set.shared_forward(tokens)
    lo, hi = layout.block_range(record.selected_density)
    expert_idx = INJECTION_ORDER.index(record.selected_density)
    out[lo:hi] = out[lo:hi] + expert_set.expert_forward(expert_idx, tokens[lo:hi])
    return out
