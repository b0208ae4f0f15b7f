#!/usr/bin/env python3
"""Cut a connected sub-network with an exact branch count out of a native grid JSON.

Buses are taken in breadth-first order from the reference bus; the kept
branches are a spanning tree of those buses plus the remaining internal
branches in file order until the count is reached. Injections are shifted to
zero mean and limits are re-derived as max(margin * |base flow|, floor).

    dynscreen parse data/case118.m -o /tmp/case118.json
    tools/make_subgrid.py /tmp/case118.json 50 -o data/fixtures/sub50.json
"""
import argparse
import json
import sys

import networkx as nx
import numpy as np


def cut(grid, count):
    ids = [b["id"] for b in grid["buses"]]
    g = nx.MultiGraph()
    g.add_nodes_from(ids)
    for k, br in enumerate(grid["branches"]):
        g.add_edge(br["from"], br["to"], key=k)

    for size in range(2, len(ids) + 1):
        order = [grid["reference"]] + [v for _, v in nx.bfs_edges(g, grid["reference"])]
        keep = set(order[:size])
        internal = sorted(k for u, v, k in g.edges(keys=True) if u in keep and v in keep)
        if len(internal) < count:
            continue
        sub = g.edge_subgraph((grid["branches"][k]["from"], grid["branches"][k]["to"], k) for k in internal)
        tree = nx.minimum_spanning_tree(nx.Graph(sub))
        chosen, used = [], set()
        for k in internal:
            e = frozenset((grid["branches"][k]["from"], grid["branches"][k]["to"]))
            if tree.has_edge(*e) and e not in used:
                chosen.append(k)
                used.add(e)
        for k in internal:
            if len(chosen) >= count:
                break
            if k not in chosen:
                chosen.append(k)
        if len(chosen) == count and nx.is_connected(nx.Graph(sub)):
            return sorted(keep, key=order.index), sorted(chosen)
    sys.exit(f"cannot cut {count} branches")


def rebuild(grid, bus_ids, branch_ids, margin, floor):
    by_id = {b["id"]: b for b in grid["buses"]}
    buses = [dict(by_id[i]) for i in bus_ids]
    mean = sum(b["p"] for b in buses) / len(buses)
    for b in buses:
        b["p"] -= mean
    branches = [dict(grid["branches"][k]) for k in branch_ids]

    pos = {b["id"]: i for i, b in enumerate(buses)}
    n = len(buses)
    lap = np.zeros((n, n))
    for br in branches:
        i, j, w = pos[br["from"]], pos[br["to"]], br["beta"]
        lap[i, i] += w
        lap[j, j] += w
        lap[i, j] -= w
        lap[j, i] -= w
    ref = pos[grid["reference"]]
    free = [i for i in range(n) if i != ref]
    theta = np.zeros(n)
    p = np.array([b["p"] for b in buses])
    theta[free] = np.linalg.solve(lap[np.ix_(free, free)], p[free])
    for br in branches:
        flow = br["beta"] * (theta[pos[br["from"]]] - theta[pos[br["to"]]])
        br["limit"] = max(margin * abs(flow), floor)

    return {"format_version": 1, "reference": grid["reference"], "buses": buses,
            "branches": branches, "monitored": list(range(len(branches)))}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("grid")
    ap.add_argument("branches", type=int)
    ap.add_argument("-o", "--out", default="-")
    ap.add_argument("--limit-margin", type=float, default=1.2)
    ap.add_argument("--min-limit", type=float, default=0.2)
    args = ap.parse_args()

    with open(args.grid) as f:
        grid = json.load(f)
    bus_ids, branch_ids = cut(grid, args.branches)
    doc = rebuild(grid, bus_ids, branch_ids, args.limit_margin, args.min_limit)
    text = json.dumps(doc, indent=1) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as f:
            f.write(text)
    print(f"{len(doc['buses'])} buses, {len(doc['branches'])} branches", file=sys.stderr)


if __name__ == "__main__":
    main()
