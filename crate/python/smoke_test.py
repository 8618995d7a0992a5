"""Smoke test for the l0tv Python bindings.

Build and install first:

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import math
import os
import tempfile

import l0tv

HERE = os.path.dirname(os.path.abspath(__file__))
CAMERAMAN = os.path.join(HERE, "..", "data", "cameraman.pgm")


def crop(image, size):
    top = (len(image) - size) // 2
    left = (len(image[0]) - size) // 2
    return [row[left:left + size] for row in image[top:top + size]]


def main():
    clean = crop(l0tv.read_image(CAMERAMAN), 32)
    assert len(clean) == 32 and len(clean[0]) == 32

    noisy, indices = l0tv.corrupt(clean, "sp", 0.3, seed=4)
    again, _ = l0tv.corrupt(clean, "sp", 0.3, seed=4)
    assert noisy == again
    assert all(noisy[i % 32][i // 32] in (0.0, 1.0) for i in indices)

    mask = l0tv.outlier_mask(noisy, "sp")
    flagged = sum(v == 0.0 for row in mask for v in row)
    assert flagged >= len(indices)

    cfg = l0tv.SolverConfig(lam=1.1)
    out = l0tv.solve_l0tv(noisy, mask=mask, config=cfg)
    assert out.converged and out.iterations <= cfg.max_iters
    assert out.trace[-1].r_grad <= cfg.tol
    assert out.trace_csv().startswith("iter,objective")

    before = l0tv.snr(noisy, clean)
    after = l0tv.snr(out.u, clean)
    assert after.snr0 > before.snr0
    assert after.snr2_err > before.snr2_err

    base = l0tv.solve_l1tv(noisy, config=cfg)
    assert all(math.isfinite(v) for row in base.u for v in row)

    k = l0tv.kernel("disc:3")
    assert abs(sum(map(sum, k)) - 1.0) < 1e-12

    run = l0tv.restore(clean, density=0.3, seed=1, kernel="disc:3")
    assert run.restored_quality.snr2 - run.input_quality.snr2 >= 3.0

    try:
        l0tv.restore(clean, noise="gauss")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown noise kind accepted")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "restored.png")
        l0tv.write_image(path, out.u)
        back = l0tv.read_image(path)
        assert max(abs(a - b) for ra, rb in zip(back, out.u) for a, b in zip(ra, rb)) <= 0.5 / 255 + 1e-12

    print(
        "ok: l0tv {} iterations, SNR0 {:.1f} -> {:.1f}, error-SNR {:.1f} -> {:.1f}".format(
            out.iterations, before.snr0, after.snr0, before.snr2_err, after.snr2_err
        )
    )


if __name__ == "__main__":
    main()
