"""Rule program deciding which blocks still have to be moved.

Works on the 12 pairwise comparison relations of a two-world blocks state
(operating world id 0, target world id 1; ground has object id 0 and sits at
(0, 0); every block directly on the ground occupies column x = its id). The
nine derived predicates run from IsGround to ShouldMove: a block in the
operating world should move iff it, or any block below it in its column,
does not coordinate-match its same-id counterpart in the target world.
"""

from .logic import HornProgram, parse_program

COMPARISON_RELATIONS = (
    "SameWorldID", "SmallerWorldID", "LargerWorldID",
    "SameID", "SmallerID", "LargerID",
    "Left", "SameX", "Right",
    "Below", "SameY", "Above",
)

RULES_TEXT = """\
# ground = the unique minimal object id (shared by both worlds)
IsGround(x) <- forall y !LargerID(x, y)
InOpWorld(x) <- SmallerWorldID(x, y)
SameColumn(x, y) <- SameWorldID(x, y) & SameX(x, y)
Covered(x) <- SameColumn(y, x) & Above(y, x)
Moveable(x) <- !IsGround(x) & !Covered(x)
Counterpart(x, y) <- SameID(x, y) & !SameWorldID(x, y)
Matched(x) <- Counterpart(x, y) & SameX(x, y) & SameY(x, y)
Misplaced(x) <- !IsGround(x) & !Matched(x)
ShouldMove(x) <- InOpWorld(x) & Misplaced(x)
ShouldMove(x) <- InOpWorld(x) & SameColumn(y, x) & Below(y, x) & Misplaced(y)
"""

_CACHED: HornProgram | None = None


def shouldmove_fixture() -> HornProgram:
    global _CACHED
    if _CACHED is None:
        _CACHED = parse_program(RULES_TEXT)
    return _CACHED
