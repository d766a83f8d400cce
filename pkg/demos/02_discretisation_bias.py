"""
How the discrete f2 statistic misjudges similarity
==================================================

Two curve pairs straddling the f2 = 50 decision line. On sparse grids the
discrete statistic lands on the wrong side of the line in both directions;
densifying the grid recovers the integral value.
"""

import dissolvegp as dg

pairs = {
    "overestimating pair": (
        dg.logistic_curve(70.91, 100.0, 0.403),
        dg.logistic_curve(70.69, 99.98, 0.292),
    ),
    "underestimating pair": (
        dg.logistic_curve(60.55, 90.0, 0.228),
        dg.logistic_curve(75.0, 100.0, 0.19),
    ),
}

for label, (curve_r, curve_t) in pairs.items():
    truth = dg.f2_integral_truth(curve_r, curve_t, 10, 60)
    ps, vals = dg.bias_sweep(curve_r, curve_t, [5, 6, 8, 10, 20, 50, 200, 1000], 10, 60)
    print(f"\n{label}: integral f2 = {truth:.3f} "
          f"({'similar' if truth >= 50 else 'dissimilar'})")
    for p, v in zip(ps, vals):
        flag = "similar" if v >= 50 else "dissimilar"
        print(f"  p={p:5d}: f2 = {v:6.3f}  -> {flag}")
