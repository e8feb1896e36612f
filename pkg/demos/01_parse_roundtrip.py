#!/usr/bin/env python3
"""Parse snort rules into structured form and serialize them back.

Walks through the core guarantees of the parser: header and option
extraction, identity-versus-antecedent separation, canonical serialization,
and line-accurate diagnostics for malformed input.
"""

from ruleforge import parse_rule, parse_ruleset, serialize_rule

RULE = (
    'alert tcp $EXTERNAL_NET any -> $HOME_NET [139,445] '
    '(msg:"NETBIOS DCERPC NCACN-IP-TCP spoolss EnumPrinters overflow attempt"; '
    'flow:established,to_server; dce_iface:12345678-1234-abcd-ef00-0123456789ab; '
    'dce_opnum:0; dce_stub_data; byte_test:4,>,256,8,dce relative; '
    'reference:cve,2006-5854; classtype:attempted-admin; sid:13162; rev:9;)'
)

RULESET = """\
# A tiny ruleset: one clean rule, one continuation, one broken header.
alert udp $EXTERNAL_NET any -> $HOME_NET 138 (msg:"NETBIOS name query"; dsize:>100; sid:2101; rev:1;)
alert tcp $EXTERNAL_NET any -> $HOME_NET 445 (msg:"NETBIOS stub probe"; \\
    flow:established,to_server; dce_stub_data; sid:2102; rev:1;)
alert tcp $EXTERNAL_NET any => $HOME_NET 445 (msg:"bad direction"; sid:2103; rev:1;)
"""


def main() -> None:
    rule = parse_rule(RULE)

    print("header fields")
    print(f"  action={rule.header.action} protocol={rule.header.protocol}")
    print(f"  source={rule.header.src_addr}:{rule.header.src_port}")
    print(f"  target={rule.header.dst_addr}:{rule.header.dst_port}")

    print("\nidentity metadata (not part of the learned representation)")
    print(f"  sid={rule.sid} rev={rule.rev}")
    print(f"  msg={rule.msg!r}")
    print(f"  references={list(rule.references)}")

    print("\nantecedent options, in rule order")
    for option in rule.options:
        shown = option.value if option.value else "<flag>"
        print(f"  {option.key} = {shown}")

    print("\nattribute view (header positions + options, flags as empty strings)")
    for key, value in sorted(rule.attribute_values().items()):
        print(f"  {key} = {value!r}")

    canonical = serialize_rule(rule)
    print("\ncanonical serialization")
    print(f"  {canonical}")
    print(f"  round-trips losslessly: {parse_rule(canonical) == rule}")

    print("\nparsing a whole ruleset never aborts on bad lines")
    rules, errors = parse_ruleset(RULESET)
    print(f"  parsed {len(rules)} rules, {len(errors)} errors")
    for err in errors:
        print(f"  line {err.line}: {err.message}")


if __name__ == "__main__":
    main()
