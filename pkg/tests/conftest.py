import numpy as np
import pytest

from cfred.synth import JointGaussianSpec


def random_spd(rng, d, jitter=1e-3):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + jitter * np.eye(d)


def random_joint_spec(seed, d_x=3, d_y=3, sample_seed=None):
    """A random spec whose (x, y, yhat) stacked covariance is PSD by construction."""
    rng = np.random.default_rng(seed)
    d = d_x + 2 * d_y
    full = random_spd(rng, d, jitter=0.1)
    sx = slice(0, d_x)
    sy = slice(d_x, d_x + d_y)
    sh = slice(d_x + d_y, d)
    return JointGaussianSpec(
        mean_x=rng.uniform(-1, 1, d_x),
        mean_y=rng.uniform(-1, 1, d_y),
        mean_yhat=rng.uniform(-1, 1, d_y),
        cov_xx=full[sx, sx],
        cov_yy=full[sy, sy],
        cov_yhat=full[sh, sh],
        cov_yx=full[sy, sx],
        cov_yhatx=full[sh, sx],
        seed=seed if sample_seed is None else sample_seed,
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            if "test_acceptance" in rep.nodeid:
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append(f"{status}  {rep.nodeid.split('::')[-1]}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
