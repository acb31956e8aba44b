"""
The specification language
==========================

Theories, mappings and programs are written in a small text format.  This
demo parses a snippet, shows a diagnostic, and prints a theory back.
"""

from ndax import FIXTURES
from ndax.lang import LoweringError, SourceDocument, format_theory, load_program, load_theory, parse_document, parse_formula

text = """
theory Door {
  sort Room {hall, kitchen};
  fluent Open;
  fluent In(r: Room);
  action push reactions r: {Opens, Stuck} {
    poss_ag: !Open;
    poss: poss_ag & (r = Opens or r = Stuck);
  }
  ssa Open: a = push(Opens) or Open;
  init { closed: In(hall); }
}
"""
door = load_theory(SourceDocument(text, "door.ndt", "theory"))
print(door, "with", len(door.initial_models()), "initial model")
print(format_theory(door))

# parse errors carry a file:line:col position
for d in parse_document(SourceDocument("theory T {\n  sort X {a};\n", "broken.ndt", "theory")):
    print(d)

# lowering errors name the culprit
try:
    load_theory(SourceDocument("theory T { fluent P(x: Nope); }", "bad.ndt", "theory"))
except LoweringError as exc:
    print(exc)

# formulas and programs are parsed against a theory
hl = load_theory(FIXTURES / "tire_hl.ndt")
print(parse_formula("exists l: Loc. At_HL(l) & Spare_HL(l)", hl))
go = load_program(FIXTURES / "go.ndp", hl)
print(go.instantiate("13"))
