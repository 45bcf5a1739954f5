"""Smoke test for the fls extension module: python python/smoke_test.py"""

import math

import fls


def main():
    data = fls.gen_synthetic([2, 2], 6, outlier_ratio=0.05, pts=150, seed=3)
    points, labels = data["points"], data["labels"]
    assert len(points) == 315 and len(points[0]) == 6

    res = fls.fls_cluster(points, k=2, flat_dim=2, landmarks=60, seed=3, restarts=3)
    assert len(res.labels) == len(points)
    assert dict(res.timings).keys() == {"landmarks", "flats", "embed", "svd", "kmeans"}
    rate, perm = fls.clustering_rate(res.labels, labels, data["outliers"])
    print(f"clustering rate {rate:.3f}, sigma {res.sigma:.4f}")
    assert rate > 0.9

    spec = fls.FeatureSpec.gaussian_rff(1.0, 4000, 3, seed=1)
    x, y = [0.0, 0.0, 0.0], [0.6, 0.0, 0.8]
    k_hat = spec.gram([x, y])[0][1]
    k = fls.exact_gaussian_kernel(x, y, 1.0)
    print(f"rff kernel {k_hat:.4f} vs exact {k:.4f}")
    assert abs(k_hat - k) < 0.1

    sub = fls.FeatureSpec.subspace(points, 40, 2, seed=0)
    psi = sub.embed(points)
    assert len(psi) == 40 and len(psi[0]) == len(points)
    assert fls.FeatureSpec.from_json(sub.to_json()).count == 40

    try:
        fls.fls_cluster(points, k=2, flat_dim=2, sigma=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative sigma accepted")
    assert math.isfinite(rate)
    print("ok")


if __name__ == "__main__":
    main()
