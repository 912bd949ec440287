"""Convert a Mulan-style ARFF file (labels as the trailing 0/1 attributes) to .mll.

    python3 scripts/arff_to_mll.py scene-train.arff scene-test.arff --labels 6 -o data/scene.mll

Several inputs are concatenated in the order given, so the train and test
halves of a public split become a single pool for cross-validation.
"""

import argparse

import numpy as np
from scipy.io import arff

from uncertain_batch.data import MultiLabelDataset, save_dataset


def read_arff(path, n_labels):
    data, meta = arff.loadarff(path)
    names = meta.names()
    cols = [np.asarray(data[name]) for name in names]
    decoded = [c.astype(str).astype(float) if c.dtype.kind in "SO" else c.astype(float) for c in cols]
    table = np.column_stack(decoded)
    return table[:, :-n_labels], table[:, -n_labels:].astype(int), names[-n_labels:]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("--labels", type=int, required=True, help="number of trailing label attributes")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args(argv)
    parts = [read_arff(p, args.labels) for p in args.inputs]
    X = np.vstack([p[0] for p in parts])
    Y = np.vstack([p[1] for p in parts])
    ds = MultiLabelDataset(X, Y, list(parts[0][2]))
    save_dataset(ds, args.output)
    print(f"wrote {args.output}: n={ds.n} d={ds.d} q={ds.q}")


if __name__ == "__main__":
    main()
