"""Applying fitted multipliers: multiplicative tilts of the base scores.

A fitted projection stores the multipliers ``lambda`` and the frozen group
marginals.  New samples are scored by rebuilding their per-sample constraint
matrices ``G(x)``, forming ``v(x) = -G(x)^T lambda``, and tilting

* KL:            ``h_c  propto  p_c exp(v_c)``
* cross-entropy: ``h_c = p_c * (-1 / (v_c + gamma))`` with the shift
  ``gamma`` chosen so the output sums to 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .constraints import (
    ConstraintSet,
    GroupModel,
    build_constraints,
    estimate_group_model,
    group_model_for,
)
from .divergence import EPS_CLIP, Divergence, ce_gamma_batch, clip_scores, softmax
from .exceptions import InvalidModelError
from .solver import DualSolution, SolverConfig, admm_fit

MODEL_FORMAT = "fairproj-projmodel v1"


@dataclass
class ProjectedModel:
    lam: np.ndarray
    metric: str
    alpha: float
    divergence: str  # "kl" or "ce"
    p_s: np.ndarray
    p_s_given_y: np.ndarray
    empty_cells: np.ndarray
    eps_clip: float = EPS_CLIP

    @property
    def num_groups(self) -> int:
        return self.p_s.size

    @property
    def num_classes(self) -> int:
        return self.p_s_given_y.shape[1]

    def frozen_group_model(self) -> GroupModel:
        return GroupModel(
            group_probs=None,
            p_s=self.p_s,
            p_s_given_y=self.p_s_given_y,
            empty_cells=self.empty_cells,
        )


def tilt_kl(p: np.ndarray, g: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """KL tilt for one sample: softmax of ``log p - G^T lambda``."""
    p = np.asarray(p, dtype=float)
    v = -np.asarray(g, dtype=float).T @ np.asarray(lam, dtype=float)
    return softmax(np.log(p) + v)


def tilt_ce(p: np.ndarray, g: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Cross-entropy tilt for one sample; the normalizing shift keeps every
    ``v_c + gamma`` strictly negative."""
    p = np.asarray(p, dtype=float)
    v = -np.asarray(g, dtype=float).T @ np.asarray(lam, dtype=float)
    gamma = ce_gamma_batch(v[None, :], p[None, :])[0]
    return p / (-(v + gamma))


def _tilt_batch(divergence: str, p: np.ndarray, cs: ConstraintSet, lam: np.ndarray) -> np.ndarray:
    v = -np.einsum("ikc,k->ic", cs.g, lam)
    if divergence == "kl":
        return softmax(np.log(p) + v)
    if divergence == "ce":
        gamma = ce_gamma_batch(v, p)
        return p / (-(v + gamma[:, None]))
    raise ValueError(f"projection supports kl and ce tilts, not {divergence!r}")


def project_scores(model: ProjectedModel, scores: np.ndarray, groups) -> np.ndarray:
    """Tilt new samples' scores.

    ``groups`` is an id array, a membership tensor, or a prebuilt GroupModel
    whose marginals must match the model's frozen ones.
    """
    p = clip_scores(np.asarray(scores, dtype=float), eps=model.eps_clip)
    if p.ndim != 2 or p.shape[1] != model.num_classes:
        raise InvalidModelError("scores width disagrees with the fitted model")
    if isinstance(groups, GroupModel):
        gm = groups
        if not (
            np.allclose(gm.p_s, model.p_s, atol=1e-12)
            and np.allclose(gm.p_s_given_y, model.p_s_given_y, atol=1e-12)
        ):
            raise InvalidModelError("group model marginals differ from the fitted ones")
    else:
        gm = group_model_for(model.frozen_group_model(), groups, model.num_classes)
    cs = build_constraints(model.metric, p, gm, model.alpha)
    return _tilt_batch(model.divergence, p, cs, model.lam)


def fit_projection(
    scores: np.ndarray,
    labels: np.ndarray,
    groups,
    metric: str,
    alpha: float,
    divergence: Divergence | str,
    cfg: SolverConfig | None = None,
    gm: GroupModel | None = None,
    eps_clip: float = EPS_CLIP,
) -> tuple[ProjectedModel, DualSolution]:
    """Estimate marginals, build constraints, and solve the dual on one split."""
    div = Divergence.kl() if divergence == "kl" else Divergence.ce() if divergence == "ce" else divergence
    if div.kind not in ("kl", "ce"):
        raise ValueError("fit_projection supports kl and ce divergences")
    p = clip_scores(np.asarray(scores, dtype=float), eps=eps_clip)
    if gm is None:
        gm = estimate_group_model(groups, labels, num_classes=p.shape[1])
    cs = build_constraints(metric, p, gm, alpha)
    sol = admm_fit(p, cs, div, cfg)
    model = ProjectedModel(
        lam=sol.lam,
        metric=metric,
        alpha=alpha,
        divergence=div.kind,
        p_s=gm.p_s,
        p_s_given_y=gm.p_s_given_y,
        empty_cells=gm.empty_cells,
        eps_clip=eps_clip,
    )
    return model, sol


def save_projected_model(model: ProjectedModel, sol: DualSolution | None, path: str) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "metric": model.metric,
        "alpha": model.alpha,
        "divergence": model.divergence,
        "eps_clip": model.eps_clip,
        "lambda": model.lam.tolist(),
        "p_s": model.p_s.tolist(),
        "p_s_given_y": model.p_s_given_y.tolist(),
        "empty_cells": model.empty_cells.astype(int).tolist(),
    }
    if sol is not None:
        payload["iterations"] = sol.iterations
        payload["primal_residuals"] = sol.primal_residuals
        payload["lambda_steps"] = sol.lambda_steps
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_projected_model(path: str) -> ProjectedModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidModelError(f"{path}: not valid JSON") from exc
    if payload.get("format") != MODEL_FORMAT:
        raise InvalidModelError(f"{path}: bad format marker; expected {MODEL_FORMAT!r}")
    try:
        return ProjectedModel(
            lam=np.asarray(payload["lambda"], dtype=float),
            metric=payload["metric"],
            alpha=float(payload["alpha"]),
            divergence=payload["divergence"],
            p_s=np.asarray(payload["p_s"], dtype=float),
            p_s_given_y=np.asarray(payload["p_s_given_y"], dtype=float),
            empty_cells=np.asarray(payload["empty_cells"], dtype=bool),
            eps_clip=float(payload["eps_clip"]),
        )
    except KeyError as exc:
        raise InvalidModelError(f"{path}: missing key {exc}") from None
