#!/usr/bin/env python3
"""Group related rules with the weighted structural/content distance.

The metric combines how many attribute keys two rules do not share with the
summed Levenshtein distance over the values of the keys they do share, then
hierarchical agglomerative clustering merges the closest groups bottom-up.
"""

import math

from ruleforge import (
    DistanceParams,
    agglomerate,
    build_distance_matrix,
    key_distance,
    levenshtein,
    parse_rule,
    rule_distance,
)

CORPUS = [
    # a netbios family: same shape, drifting payload checks
    'alert tcp $EXTERNAL_NET any -> $HOME_NET [139,445] (msg:"smb probe A"; '
    'flow:established,to_server; dce_opnum:0; byte_test:4,>,256,8,relative,dce; sid:1; rev:1;)',
    'alert tcp $EXTERNAL_NET any -> $HOME_NET [139,445] (msg:"smb probe B"; '
    'flow:established,to_server; dce_opnum:1; byte_test:4,>,512,8,relative,dce; sid:2; rev:1;)',
    'alert tcp $EXTERNAL_NET any -> $HOME_NET [135,139,445] (msg:"smb probe C"; '
    'flow:established,to_server; dce_opnum:0; byte_test:4,>,256,8,relative,dce; sid:3; rev:1;)',
    # a web family: different option keys entirely
    'alert tcp $EXTERNAL_NET any -> $HOME_NET 80 (msg:"cgi fetch A"; '
    'flow:to_server,established; content:"GET /cgi-bin/"; nocase; sid:4; rev:1;)',
    'alert tcp $EXTERNAL_NET any -> $HOME_NET 80 (msg:"cgi fetch B"; '
    'flow:to_server,established; content:"GET /cgi-sys/"; nocase; sid:5; rev:1;)',
    # a lone stateless udp rule
    'alert udp $EXTERNAL_NET any -> $HOME_NET 138 (msg:"name query"; '
    'flow:stateless; dsize:>100; sid:6; rev:1;)',
]


def main() -> None:
    rules = [parse_rule(text) for text in CORPUS]
    params = DistanceParams(w1=1.0, w2=1.0)

    print("pairwise distance of the first two rules, term by term")
    values_a = rules[0].attribute_values()
    values_b = rules[1].attribute_values()
    lev_sum = 0
    for key in sorted(values_a.keys() & values_b.keys()):
        d = levenshtein(values_a[key], values_b[key])
        lev_sum += d
        if d:
            print(f"  {key}: {values_a[key]!r} vs {values_b[key]!r} -> {d} edits")
    keys_term = key_distance(rules[0], rules[1])
    print(f"  unshared keys: {keys_term}, summed edits over shared keys: {lev_sum}")
    print(
        f"  combined: {params.w1}*{keys_term} + {params.w2}*{lev_sum}"
        f" = {rule_distance(rules[0], rules[1], params):.1f}"
    )

    matrix = build_distance_matrix(rules, params)
    print("\ndistance matrix")
    for row in matrix.entries:
        print("  " + " ".join(f"{value:6.1f}" for value in row))

    assignment = agglomerate(matrix, "average", cut_count=3)
    print("\nmerge history (cluster ids are their smallest member)")
    for a, b, height in assignment.merge_history:
        print(f"  {a} + {b} at height {height:.2f}")

    print("\nclusters at k=3")
    for label, members in assignment.clusters().items():
        sids = [rules[m].sid for m in members]
        print(f"  cluster {label}: sids {sids}")

    default_k = math.ceil(math.sqrt(len(rules)))
    assignment = agglomerate(matrix, "average")
    print(f"\ndefault cut is ceil(sqrt(n)) = {default_k} clusters")
    for label, members in assignment.clusters().items():
        print(f"  cluster {label}: rules {members}")


if __name__ == "__main__":
    main()
