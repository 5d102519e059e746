"""Matplotlib renderings of the report tables (PNG, headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 110,
    "savefig.bbox": "tight",
}

COLORS = {"PWLS": "#b2182b", "PWPPE": "#2166ac"}


def size(scale=1.0, ratio=None):
    width = 6.4 * scale
    if ratio is None:
        ratio = (np.sqrt(5.0) - 1.0) / 2.0
    return width, width * ratio


def save(fig, path):
    # no timestamps in the file so reruns are reproducible
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def row_profile(pwls, pwppe, path, band=0.03):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(1.1, 0.45))
        x = np.arange(pwls.row_profile.size)
        ax.plot(x, pwls.row_profile, lw=0.7, color=COLORS["PWLS"], label="PWLS")
        ax.plot(x, pwppe.row_profile, lw=0.7, color=COLORS["PWPPE"], label="PWPPE")
        ax.axhspan(-band, band, color="0.85", zorder=0, lw=0)
        ax.set_xlabel("column (px)")
        ax.set_ylabel("phase error (rad)")
        ax.set_title(f"row {pwls.row}")
        ax.set_xlim(0, x[-1])
        ax.legend(frameon=False, ncol=2, loc="upper right")
        return save(fig, path)


def error_maps(pwls, pwppe, path):
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=size(1.2, 0.45))
        lim = max(np.abs(pwls.full_error.values).max(), 1e-6)
        for ax, rep in zip(axes, (pwls, pwppe)):
            img = np.where(rep.full_error.mask, rep.full_error.values, np.nan)
            im = ax.imshow(img, cmap="RdBu_r", vmin=-lim, vmax=lim, interpolation="nearest")
            ax.set_title(f"{rep.method}  rms {rep.rms:.4f} rad")
            ax.set_xticks([])
            ax.set_yticks([])
        fig.colorbar(im, ax=axes, shrink=0.8, label="rad")
        return save(fig, path)


def selftest(pwppe, path):
    st = pwppe.selftest
    with plt.rc_context(RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=size(1.1, 0.42))
        vals = st.values[st.mask]
        ax0.hist(vals, bins=200, range=(0.8, 1.2), color=COLORS["PWPPE"])
        ax0.axvline(1.0, color="k", lw=0.6)
        ax0.set_xlabel(r"$\sqrt{O_s^2 + O_c^2}$")
        ax0.set_ylabel("pixels")
        bands = sorted(pwppe.selftest_bands)
        ax1.plot(bands, [100 * pwppe.selftest_bands[b] for b in bands], "o-", color=COLORS["PWPPE"])
        ax1.set_xlabel("band half-width")
        ax1.set_ylabel("proportion (%)")
        ax1.set_ylim(0, 102)
        return save(fig, path)


def table1(results, path):
    names = [name for name, _, _ in results]
    x = np.arange(len(names))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(1.0, 0.5))
        for k, method in enumerate(("PWLS", "PWPPE")):
            vals = [(ls if method == "PWLS" else pp).mse for _, ls, pp in results]
            ax.bar(x + (k - 0.5) * 0.38, np.array(vals) * 1e4, width=0.38,
                   color=COLORS[method], label=method)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylabel(r"mse ($10^{-4}$ rad$^2$)")
        ax.legend(frameon=False)
        return save(fig, path)


def loss_curve(history, path, target=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size(0.8))
        ax.semilogy(np.arange(1, len(history) + 1), history, lw=0.8, color=COLORS["PWPPE"])
        if target:
            ax.axhline(target, ls="--", lw=0.6, color="k")
        ax.set_xlabel("iteration (pass over training set)")
        ax.set_ylabel("training mse")
        return save(fig, path)


def render_report(results, out_dir):
    out = Path(out_dir)
    _, ls, pp = results[0]
    paths = [
        row_profile(ls, pp, out / "row_profile.png"),
        error_maps(ls, pp, out / "error_maps.png"),
        table1(results, out / "table1.png"),
    ]
    if getattr(pp, "selftest", None) is not None:
        paths.append(selftest(pp, out / "selftest.png"))
    return paths
