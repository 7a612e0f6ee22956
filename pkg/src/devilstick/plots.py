"""Figure rendering for the CLI report path.

Kept out of the core library: everything here reads the CSV/JSON
artifacts a run already wrote, so any external tool could do the same.
"""

from __future__ import annotations

import json
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _load_csv(csv_path):
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    if data.size == 0:
        raise ValueError(f"{csv_path} holds no samples")
    return data


def render_run_figures(csv_path, out_dir, crossings_path=None, circle_radius=None):
    """Write the standard set of PNG figures for a trajectory CSV.

    Returns the list of files written. Crossing markers appear on the
    energy plot when a crossings JSON is supplied.
    """
    data = _load_csv(csv_path)
    crossings = []
    if crossings_path and os.path.exists(crossings_path):
        with open(crossings_path, "r", encoding="utf-8") as fh:
            crossings = json.load(fh)
    written = []

    def save(fig, name):
        path = os.path.join(out_dir, name)
        fig.savefig(path, dpi=130, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    t = data["t"]

    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(t, data["rho1"], lw=0.8, label="rho_1")
    axes[0].plot(t, data["rho2"], lw=0.8, label="rho_2")
    axes[0].set_ylabel("constraint error [m]")
    axes[0].legend(loc="upper right")
    norm = np.hypot(data["rho1"], data["rho2"])
    axes[1].semilogy(t, np.maximum(norm, 1e-16), lw=0.8)
    axes[1].set_ylabel("|rho|")
    axes[1].set_xlabel("t [s]")
    fig.suptitle("Constraint error")
    save(fig, "constraint_error.png")

    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(t, data["F"], lw=0.8)
    axes[0].set_ylabel("F [N]")
    axes[0].axhline(0.0, color="k", lw=0.5)
    axes[1].plot(t, data["r"], lw=0.8)
    axes[1].set_ylabel("r [m]")
    axes[1].set_xlabel("t [s]")
    fig.suptitle("Control inputs")
    save(fig, "control_inputs.png")

    fig, ax = plt.subplots(figsize=(6, 4.5))
    theta = data["theta_wrapped"] if "theta_wrapped" in data.dtype.names else data["theta"]
    ax.plot(theta, data["dtheta"], ",", ms=1)
    ax.set_xlabel("theta wrapped to (-pi, pi]")
    ax.set_ylabel("dtheta [rad/s]")
    ax.set_title("Stick angle phase portrait")
    save(fig, "phase_portrait.png")

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, data["E"], lw=0.9)
    for c in crossings:
        ax.axvline(c["t"], color="gray", lw=0.4, alpha=0.6)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("E")
    ax.set_title("Reduced-flow integral at section crossings")
    save(fig, "energy.png")

    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot(data["h_x"], data["h_y"], lw=0.7)
    if circle_radius is not None:
        angles = np.linspace(0.0, 2.0 * math.pi, 256)
        ax.plot(circle_radius * np.cos(angles), circle_radius * np.sin(angles),
                "--", color="gray", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("h_x [m]")
    ax.set_ylabel("h_y [m]")
    ax.set_title("Center-of-mass path")
    save(fig, "com_path.png")

    return written
