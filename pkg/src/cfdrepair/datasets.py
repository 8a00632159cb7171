"""Built-in fixtures: the small address demo and synthetic generators.

The demo table is eight US address records with postal rules, sized so
every candidate and cascade can be checked by hand.  The synthetic
generator builds city/street/zip data at any scale, with optional skew
in city sizes and an optional source column whose value correlates
with which attribute gets corrupted, for studying what the feedback
models can pick up.
"""
from __future__ import annotations

import math
import random

from .evaluation import ErrorSpec, inject_errors
from .model import Dataset
from .rules import RuleSet, parse_rules

DEMO_CSV = """\
__id,NAME,HN,STR,CT,STT,ZIP
t1,JIM,H1,REDWOOD DR,MICHIGAN CITY,MI,46360
t2,TOM,H2,REDWOOD DR,WESTVILLE,IN,46360
t3,JEFF,H2,BIRCH PARKWAY,WESTVILLE,IN,46360
t4,RICK,H2,BIRCH PARKWAY,WESTVILLE,IN,46360
t5,JOE,H1,BELL AVENUE,FORT WAYNE,IN,46391
t6,MARK,H1,BELL AVENUE,FORT WAYNE,IN,46825
t7,CADY,H2,BELL AVENUE,FORT WAYNE,IN,46825
t8,SINDY,H2,SHERDEN RD,FT WAYNE,IN,46774
"""

DEMO_RULES = """\
# postal consistency for the demo address table
z46360: ZIP -> CT, STT : 46360 || MICHIGAN CITY, IN
z46774: ZIP -> CT, STT : 46774 || NEW HAVEN, IN
z46825: ZIP -> CT, STT : 46825 || FORT WAYNE, IN
z46391: ZIP -> CT, STT : 46391 || WESTVILLE, IN
fw_street: STR, CT -> ZIP : -, FORT WAYNE || -
"""


def demo_dataset() -> Dataset:
    return Dataset.from_csv_text(DEMO_CSV)


def demo_rules() -> RuleSet:
    return parse_rules(DEMO_RULES, demo_dataset().schema)


DEMO_TRUTH_CSV = """\
__id,NAME,HN,STR,CT,STT,ZIP
t1,JIM,H1,REDWOOD DR,MICHIGAN CITY,IN,46360
t2,TOM,H2,REDWOOD DR,WESTVILLE,IN,46391
t3,JEFF,H2,BIRCH PARKWAY,WESTVILLE,IN,46391
t4,RICK,H2,BIRCH PARKWAY,WESTVILLE,IN,46391
t5,JOE,H1,BELL AVENUE,FORT WAYNE,IN,46825
t6,MARK,H1,BELL AVENUE,FORT WAYNE,IN,46825
t7,CADY,H2,BELL AVENUE,FORT WAYNE,IN,46825
t8,SINDY,H2,SHERDEN RD,NEW HAVEN,IN,46774
"""


def demo_truth() -> Dataset:
    """A rule-consistent resolution of the demo table, usable as ground
    truth for simulated sessions."""
    return Dataset.from_csv_text(DEMO_TRUTH_CSV)


STREET_BASES = ("MAIN ST", "OAK AVE", "ELM DR", "CEDAR LN")
STATES = ("IN", "MI", "OH", "IL", "KY")


def _city_sizes(rows: int, cities: int, skew: float, minimum: int) -> list[int]:
    """Integer city sizes summing to ``rows``; skew > 0 concentrates
    rows in the first cities (size proportional to 1/(i+1)^skew)."""
    weights = [(i + 1) ** -skew for i in range(cities)]
    total = sum(weights)
    sizes = [max(minimum, math.floor(rows * w / total)) for w in weights]
    # distribute the rounding remainder over the largest cities
    i = 0
    while sum(sizes) < rows:
        sizes[i % cities] += 1
        i += 1
    while sum(sizes) > rows:
        j = max(range(cities), key=lambda x: sizes[x])
        if sizes[j] <= minimum:
            break
        sizes[j] -= 1
    return sizes


def synthetic_clean(
    rows: int = 2000,
    cities: int = 125,
    streets_per_city: int = 2,
    skew: float = 0.0,
    src_column: bool = False,
    variable_rule: bool = True,
    seed: int = 0,
) -> tuple[Dataset, str]:
    """A clean address table plus the text of rules it satisfies.

    Every city has its own zip code and state and a private pool of
    street names, so one constant rule family per zip pins city and
    state, and a single variable rule requires street+city to agree on
    the zip.  Returns (dataset, rules text).
    """
    rng = random.Random(f"synth|{seed}")
    sizes = _city_sizes(rows, cities, skew, minimum=2 * streets_per_city)
    attributes = (["SRC"] if src_column else []) + ["STR", "CT", "STT", "ZIP"]
    lines = [",".join(["__id"] + attributes)]
    rule_lines = []
    row = 0
    for i, size in enumerate(sizes):
        zip_code = str(46000 + i)
        city = f"CITY{i:03d}"
        state = STATES[i % len(STATES)]
        rule_lines.append(f"z{zip_code}: ZIP -> CT, STT : {zip_code} || {city}, {state}")
        for j in range(size):
            street = f"{STREET_BASES[j % streets_per_city]} {i:03d}"
            cells = [street, city, state, zip_code]
            if src_column:
                cells.insert(0, rng.choice(("H1", "H2")))
            row += 1
            lines.append(",".join([f"t{row}"] + cells))
    if variable_rule:
        rule_lines.append("street_zip: STR, CT -> ZIP : -, - || -")
    dataset = Dataset.from_csv_text("\n".join(lines) + "\n")
    return dataset, "\n".join(rule_lines) + "\n"


def convergence_fixture(seed: int = 1) -> tuple[Dataset, Dataset, RuleSet]:
    """2000 rows, uniform city sizes, 30% injected errors.  Street/city
    groups of size 8 keep every detectable error reachable: a wrong
    city or state always has the rule constant as a suggestion, and a
    wrong zip either has a clean group partner holding the truth or a
    pool deep enough that repeated rejection reveals the truth."""
    clean, rules_text = synthetic_clean(rows=2000, cities=125, streets_per_city=2, seed=97)
    rules = parse_rules(rules_text, clean.schema)
    dirty, truth = inject_errors(clean, ErrorSpec(tuple_rate=0.30, seed=seed), rules)
    return dirty, truth, rules


def skewed_fixture(seed: int = 1) -> tuple[Dataset, Dataset, RuleSet]:
    """2000 rows with strongly skewed city sizes and 30% errors, so
    update groups range from a couple of members to dozens."""
    clean, rules_text = synthetic_clean(
        rows=2000, cities=80, streets_per_city=2, skew=1.2, seed=53
    )
    rules = parse_rules(rules_text, clean.schema)
    dirty, truth = inject_errors(clean, ErrorSpec(tuple_rate=0.30, seed=seed), rules)
    return dirty, truth, rules


def correlated_fixture(
    seed: int = 1, rate: float = 0.30
) -> tuple[Dataset, Dataset, RuleSet]:
    """Errors correlated with a source column the rules never mention:
    records from source H2 get a mangled city name, records from source
    H1 a mangled zip.  The mangled values fall outside the clean domain,
    so the right suggestion for a broken city is always its rule
    constant, and a feedback model that reads the source value from the
    features quickly learns which suggestions to trust."""
    clean, rules_text = synthetic_clean(
        rows=2000,
        cities=125,
        streets_per_city=2,
        src_column=True,
        variable_rule=False,
        seed=29,
    )
    rules = parse_rules(rules_text, clean.schema)
    rng = random.Random(f"corr|{seed}")
    dirty = clean.copy()
    ids = [t.id for t in clean.tuples]
    count = math.floor(rate * len(ids) + 0.5)
    for tid in rng.sample(ids, count):
        if clean.value(tid, "SRC") == "H2":
            original = dirty.value(tid, "CT")
            dirty.set_value(tid, "CT", "X" + original[1:])
        else:
            original = dirty.value(tid, "ZIP")
            dirty.set_value(tid, "ZIP", "9" + original[1:])
    return dirty, clean, rules
