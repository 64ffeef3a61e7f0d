PARTITION_SCHEMES = [
    {"id": "CCDR", "kind": "preset", "description": "One block: no ordering information"},
    {"id": "CSCS", "kind": "preset", "description": "One block per variable in the true topological order"},
    {"id": "PDAG-2", "kind": "preset", "description": "Quarters of the topological order as Q1 | Q2+Q3+Q4"},
    {"id": "PDAG-3", "kind": "preset", "description": "Quarters of the topological order as Q1 | Q2 | Q3+Q4"},
    {"id": "PDAG-4", "kind": "preset", "description": "Quarters of the topological order as Q1 | Q2 | Q3 | Q4"},
    {"id": "EQUAL-R", "kind": "parametric", "description": "R contiguous blocks of near-equal size, e.g. EQUAL-5"},
    {"id": "CUTS:a,b,...", "kind": "parametric", "description": "Blocks ending at 1-based topological positions, e.g. CUTS:24,36"},
    {"id": "SOURCE:i,j,...", "kind": "parametric", "description": "Two blocks: the listed 1-based topological positions, then the rest"},
]

# Quarter groupings behind the PDAG-k presets: each inner tuple lists quarters merged into one block.
QUARTER_GROUPS = {
    "PDAG-2": ((0,), (1, 2, 3)),
    "PDAG-3": ((0,), (1,), (2, 3)),
    "PDAG-4": ((0,), (1,), (2,), (3,)),
}


def get_scheme_list() -> str:
    """Returns the scheme registry formatted for --help output"""
    return "\n".join(f"  {s['id']}: {s['description']}" for s in PARTITION_SCHEMES)
