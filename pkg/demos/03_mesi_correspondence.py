"""Every valid hardware MESI transition, replayed on the authorization machine.

Also shows what happens when the machine loses a row: the enumeration names
the hardware transition that no longer has an image.
"""

from capcoherence.coherence import (
    TRANSITIONS,
    AuthEvent,
    AuthState,
    permitted_ops,
    verify_structural_equivalence,
)

for state in AuthState:
    ops = ", ".join(sorted(o.value for o in permitted_ops(state).ops)) or "nothing"
    print(f"{state}: {ops}")
print()

print("\n".join(verify_structural_equivalence().lines()))
print()

broken = dict(TRANSITIONS)
del broken[(AuthState.M, AuthEvent.REVOKE_CASCADE)]
report = verify_structural_equivalence(auth_table=broken)
print("without the cascade row:")
for check in report.missing:
    s1, e, s2 = check.hw
    print(f"  unmatched {s1.value} --{e.value}--> {s2.value}")
