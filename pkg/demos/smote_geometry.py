"""Where SMOTE puts its synthetic rows, checked row by row from the provenance.

    python3 demos/smote_geometry.py
"""

import numpy as np

from nidsbalance.data import SyntheticSpec, generate_synthetic
from nidsbalance.sampling import SmoteConfig, smote

d = generate_synthetic(SyntheticSpec(n_majority=200, n_minority=8, n_features=2, seed=4))
out, prov = smote(d, SmoteConfig(k=3, seed=1), return_provenance=True)
print("before:", d.class_counts(), "after:", out.class_counts())

synth = out.X[d.n_rows:]
for row, i, l, g in list(zip(synth, prov.base, prov.neighbor, prov.gamma))[:5]:
    x_i, x_l = d.X[i], d.X[l]
    print(f"row {i:3d} -> neighbour {l:3d}  gamma={np.round(g, 3)}  "
          f"synthetic={np.round(row, 3)}  reconstructs={np.allclose(row, x_i + g * (x_l - x_i))}")

lo, hi = d.X[d.y == 0].min(0), d.X[d.y == 0].max(0)
print("all synthetic rows inside the minority bounding box:",
      bool(((synth >= lo) & (synth <= hi)).all()))
