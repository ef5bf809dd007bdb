"""Personas and the 2^5 experiment grid.

Each agent role ships with a Default persona and one specialist; the
full grid is every one-persona-per-role combination, 2^5 = 32 cells.
"""

from collections import Counter

from gmas_harness import AgentRole, PersonaRegistry, enumerate_grid, render_persona_prompt
from gmas_harness.scenario import ROLE_CHARTERS

registry = PersonaRegistry.builtin()

print("registry contents:")
for role in AgentRole:
    ids = [p.id for p in registry.for_role(role)]
    print(f"  {role.value:12s} {ids}")

sets = enumerate_grid(registry)
print(f"\ngrid size: {len(sets)} persona sets")
print("first three set ids:")
for s in sets[:3]:
    print(" ", s.set_id)

counts = Counter(pid for s in sets for _, pid in s.assignment)
print("\nappearances per persona id (each should be 16 across its role):")
print(" ", dict(counts))

print("\nrendered system prompt for the Minimalist Coder:")
minimalist = registry.get("Minimalist", AgentRole.CODER)
print(render_persona_prompt(minimalist, ROLE_CHARTERS[AgentRole.CODER]))
