#!/usr/bin/env python3
"""Convert a MATLAB network file (the node2vec Homo_sapiens.mat layout, with a
sparse 'network' adjacency and sparse 'group' label matrix) into the edge list
and label TSV files read by the sip CLI."""

import argparse

import scipy.io
import scipy.sparse


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("mat", help="input .mat file")
    parser.add_argument("edges", help="output edge list (src<TAB>dst<TAB>weight)")
    parser.add_argument("labels", help="output labels (node<TAB>label)")
    args = parser.parse_args()

    data = scipy.io.loadmat(args.mat)
    network = scipy.sparse.triu(scipy.sparse.csr_matrix(data["network"]), k=1).tocoo()
    groups = scipy.sparse.csr_matrix(data["group"]).tocoo()

    with open(args.edges, "w") as f:
        for i, j, w in sorted(zip(network.row, network.col, network.data)):
            f.write(f"{i}\t{j}\t{float(w)!r}\n")
    with open(args.labels, "w") as f:
        for i, label in sorted(zip(groups.row, groups.col)):
            f.write(f"{i}\t{label}\n")


if __name__ == "__main__":
    main()
