#!/usr/bin/env python3
"""Builds the SanDisk mini fixture and its oracle sidecars.

Everything is derived from one seeded RNG so reruns are byte-identical.
The oracle files are computed here from the generator's own ground truth
(claim kinds, planted triples) with plain-Python formulas; the Rust side
never writes them.

    python3 fixtures/gen_fixture.py [--out fixtures]
"""

import argparse
import datetime as dt
import json
import math
import os
import random
from collections import OrderedDict

SEED = 20260101
EVAL = dt.date(2026, 1, 1)
DAYS_PER_YEAR = 365.25
DAYS_PER_MONTH = DAYS_PER_YEAR / 12.0

PARAM_NAMES = [
    "L_rem", "S_claim", "N_fam", "V_cite", "N_reassign", "S_litigation", "S_trend", "T_pend",
    "N_bcite", "N_ecite", "S_inv", "S_rej", "S_CIP", "TRL", "MRL", "V_TAM", "V_rev", "CAGR_tech",
    "S_juris", "S_sc", "P_cost", "T_market", "N_app", "N_comp", "S_mfg", "S_demand", "S_partner",
    "S_invest", "N_launch", "S_MA", "S_owner", "S_forecast", "S_NeedSeed",
]

CLAIM_SCORES = {"product": 1.0, "process": 0.7, "composition": 0.5}
LIT_WEIGHTS = {"PlaintiffWin": 1.0, "Settlement": 0.5, "DefendantWin": 0.0}
PARTNER_WEIGHTS = {"JointVenture": 1.0, "Licensing": 0.7, "MoU": 0.3}
STATUS_FACTOR = {"granted": 1.0, "pending": 0.7}
AUTHORITY = {"RegulatoryFiling": 1.0, "EarningsCall": 0.9, "MarketReport": 0.7, "News": 0.5, "Blog": 0.4}
QUICK_MONETIZATION_WEIGHTS = (0.2, 0.1, 0.5, 0.2)

GNI = OrderedDict([
    ("USA", 80300.0), ("JPN", 39030.0), ("KOR", 35990.0), ("CHN", 13400.0),
    ("DEU", 53390.0), ("TWN", 33900.0), ("GBR", 49240.0), ("FRA", 45180.0),
])

MARKET = OrderedDict([
    ("G11C", dict(tam_usd=1.1e11, revenue_usd=4.2e9, market_start=6.1e10, market_end=1.1e11, horizon_years=5,
                  filings_start=1200, filings_end=2100, signal_power=40.0, noise_power=2.0,
                  deals_value_usd=3.5e9, deals_count=6,
                  partnership_counts={"JointVenture": 2, "Licensing": 5, "MoU": 3})),
    ("H10B", dict(tam_usd=3.4e10, revenue_usd=9.0e8, market_start=2.2e10, market_end=3.4e10, horizon_years=5,
                  filings_start=600, filings_end=900, signal_power=12.0, noise_power=3.0,
                  deals_value_usd=8.0e8, deals_count=2, partnership_counts={"Licensing": 2})),
    ("G06F", dict(tam_usd=2.3e11, revenue_usd=1.5e9, market_start=2.0e11, market_end=2.3e11, horizon_years=5,
                  filings_start=5000, filings_end=5600, signal_power=8.0, noise_power=4.0,
                  deals_value_usd=1.2e10, deals_count=14,
                  partnership_counts={"JointVenture": 1, "Licensing": 9})),
    ("H01L", dict(tam_usd=6.0e10, revenue_usd=7.0e8, market_start=5.2e10, market_end=6.0e10, horizon_years=5,
                  filings_start=3000, filings_end=3300, signal_power=5.0, noise_power=5.0,
                  deals_value_usd=2.0e9, deals_count=4, partnership_counts={"MoU": 4})),
    ("H04L", dict(tam_usd=9.0e10, revenue_usd=2.0e8, market_start=8.5e10, market_end=9.0e10, horizon_years=5,
                  filings_start=2000, filings_end=2100, signal_power=3.0, noise_power=6.0,
                  partnership_counts={})),
    ("G06N", dict(tam_usd=1.5e11, revenue_usd=3.0e8, market_start=6.0e10, market_end=1.5e11, horizon_years=5,
                  filings_start=800, filings_end=1600, signal_power=30.0, noise_power=1.5,
                  deals_value_usd=9.0e9, deals_count=11,
                  partnership_counts={"JointVenture": 3, "MoU": 6})),
])

CPC_SUBGROUPS = {
    "G11C": ["G11C16/04", "G11C16/26", "G11C11/54", "G11C7/10", "G11C29/52"],
    "H10B": ["H10B41/27", "H10B43/27", "H10B43/50"],
    "G06F": ["G06F3/06", "G06F12/02", "G06F1/16", "G06F21/57"],
    "H01L": ["H01L21/768", "H01L23/48", "H01L25/065"],
    "H04L": ["H04L45/00", "H04L7/00", "H04L9/08"],
    "G06N": ["G06N20/00", "G06N5/04"],
}

TOPICS = {
    "G11C": [
        "reducing read disturb errors in dense multi level cells",
        "faster wear leveling for embedded controllers",
        "lower standby leakage in static random access cells",
        "accurate threshold voltage tracking across temperature",
        "shorter program time for quad level cells",
        "robust data retention after high temperature baking",
    ],
    "H10B": [
        "higher aspect ratio channel hole etching",
        "uniform word line replacement in vertical stacks",
        "lower resistance staircase contacts",
        "reduced wafer bow in tall stacks",
    ],
    "G06F": [
        "thinner hinge assemblies for foldable laptops",
        "secure firmware updates for storage controllers",
        "lower latency host command queues",
        "compact cooling for fanless tablets",
        "faster garbage collection for log structured file systems",
    ],
    "H01L": [
        "reducing warpage in thin wafer bonding",
        "lower contact resistance in vertical transistors",
        "reliable through silicon via plating",
        "cleaner dicing of brittle substrates",
    ],
    "H04L": [
        "resilient packet routing in mesh topologies",
        "lower jitter clock recovery for serial links",
        "faster key rotation for encrypted links",
    ],
    "G06N": [
        "explainable credit scoring with sparse data",
        "cheaper labeling of training images",
        "robust anomaly detection in sensor logs",
    ],
}

DETAILS = {
    "G11C": ["A sense amplifier compares bit line currents against adaptive references.",
             "A controller adjusts verify levels per block.",
             "Page buffers hold intermediate states between passes."],
    "H10B": ["Alternating oxide and nitride layers are etched in one pass.",
             "Sacrificial layers are replaced through slits.",
             "Support pillars limit stack deformation."],
    "G06F": ["A host interface tracks outstanding commands.",
             "A hinge bracket couples the display to the base.",
             "A boot loader verifies signed images."],
    "H01L": ["A bonding layer joins two substrates at low temperature.",
             "A barrier liner precedes copper fill.",
             "A laser scribes the street before sawing."],
    "H04L": ["Nodes exchange link quality beacons.",
             "A phase detector drives a digital loop filter.",
             "Session keys are derived from a shared secret."],
    "G06N": ["A gradient boosted model produces reason codes.",
             "An active learning loop selects uncertain samples.",
             "A seasonal baseline is subtracted from each stream."],
}

# Preambles with a known claim kind. Each head names exactly one noun from
# the analyzer's kind lists.
PREAMBLES = {
    "G11C": [("product", "A storage device"), ("process", "A method of programming cells")],
    "H10B": [("product", "A vertical structure"), ("process", "A method of etching a stack")],
    "G06F": [("product", "A computing system"), ("process", "A method of handling commands")],
    "H01L": [("product", "A semiconductor package"), ("process", "A method of bonding wafers"),
             ("composition", "A plating composition")],
    "H04L": [("product", "A network apparatus"), ("process", "A method of routing frames")],
    "G06N": [("product", "A scoring system"), ("process", "A method of labeling images")],
}

LIMITATIONS = {
    "G11C": ["a plurality of word lines", "a sense circuit coupled to bit lines", "a verify stage", "a page buffer"],
    "H10B": ["alternating conductive and insulating layers", "a channel pillar", "a staircase region", "a slit trench"],
    "G06F": ["a command queue", "a hinge bracket", "a signed boot image", "a thermal spreader"],
    "H01L": ["a bonding layer", "a copper pad", "a tantalum liner", "a dicing street"],
    "H04L": ["a routing table", "a phase detector", "a key schedule", "a beacon generator"],
    "G06N": ["a feature store", "a gradient boosted model", "a labeling queue", "a seasonal baseline"],
}

PLANTED_NEED = "energy efficient neural network inference inside NAND flash memory"
PLANTED_TITLES = [
    "In-memory neural inference engine for NAND flash",
    "Bit line current accumulation for neural weights",
    "Plane-parallel inference scheduling in flash arrays",
    "Low power multiply accumulate sensing in NAND strings",
]
PLANTED_DETAILS = [
    "Weights of a neural network are stored as cell threshold states and bit line currents are summed as multiply accumulate results.",
    "A sense circuit digitizes accumulated string currents so inference layers execute inside the flash die.",
    "A controller schedules inference layers across memory planes to keep activations local to the array.",
]

STOPWORDS = set("""a about above after again all also an and any are as at be been being between both but by
can could do does each for from further has have having he her here his how i if in into is it its itself
more most no nor not of on one only or other our out over said same she should so some such than that the
their them then there these they this those through to under until up very was we were what when where
wherein which while who whom why will with would you your""".split())

LEGAL_SUFFIXES = ["CORP", "INC", "LTD", "LLC", "CO", "GMBH"]

ALIASES = [
    ("SanDisk Technologies", "SANDISK"),
    ("SanDisk LLC", "SANDISK"),
    ("SanDisk 3D", "SANDISK"),
    ("Western Digital Technologies", "WESTERN DIGITAL"),
    ("Hanul Electronics Co., Ltd.", "HANUL ELECTRONICS"),
    ("Hanul Elec", "HANUL ELECTRONICS"),
    ("Mirae Motors Corp", "MIRAE MOTORS"),
]

ASSIGNEES = ["SanDisk Technologies, Inc.", "SanDisk, LLC", "SANDISK 3D LLC", "Western Digital Technologies, Inc."]

FIRST = ["Yan", "Priya", "Daniel", "Keiko", "Marco", "Sung", "Ravi", "Elena", "Tomas", "Hiro", "Nadia", "Chen",
         "Oren", "Lucia", "Jae", "Amit"]
LAST = ["Li", "Sharma", "Kovacs", "Tanaka", "Rossi", "Park", "Iyer", "Novak", "Berg", "Sato", "Haddad", "Wu",
        "Levi", "Ortiz", "Kim", "Gupta"]


def clean_name(raw):
    out = "".join(c if (c.isalnum() or c.isspace()) else " " for c in raw)
    return " ".join(w.upper() for w in out.split())


def canonicalize(raw):
    words = clean_name(raw).split(" ")
    while len(words) > 1 and words[-1] in LEGAL_SUFFIXES:
        words.pop()
    key = " ".join(words)
    table = {}
    for pattern, canonical in ALIASES:
        pw = clean_name(pattern).split(" ")
        while len(pw) > 1 and pw[-1] in LEGAL_SUFFIXES:
            pw.pop()
        table[" ".join(pw)] = canonical
    return table.get(key, key)


def content_tokens(text):
    toks, cur = [], []
    for ch in text:
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            toks.append("".join(cur).lower())
            cur = []
    if cur:
        toks.append("".join(cur).lower())
    return [t for t in toks if t not in STOPWORDS and not (t.isascii() and t.isdigit())]


def jaccard(a, b):
    u = len(a | b)
    return len(a & b) / u if u else 0.0


def snr_db(signal, noise, floor=-60.0):
    if signal == 0:
        return floor
    return max(10.0 * math.log10(signal / noise), floor)


def cagr(start, end, years):
    return (end / start) ** (1.0 / years) - 1.0


def add_years(d, n):
    return d.replace(year=d.year + n)


def rand_date(rng, lo, hi):
    return lo + dt.timedelta(days=rng.randrange((hi - lo).days + 1))


def iso(d):
    return d.isoformat() if d else None


class Gen:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.serial = 10_000_000
        self.truth = {}

    def next_id(self, pending=False):
        self.serial += self.rng.randrange(1_000, 40_000)
        return f"US-2024{self.serial % 10_000_000:07d}-A1" if pending else f"US-{self.serial}-B2"

    def inventors(self, n, hot):
        rng = self.rng
        out = []
        for _ in range(n):
            name = f"{rng.choice(FIRST)} {rng.choice(LAST)}"
            if hot:
                h = float(rng.randrange(28, 46))
                collab = float(rng.randrange(20, 60))
            else:
                h = float(rng.randrange(2, 22))
                collab = float(rng.randrange(1, 25))
            out.append({"name": name, "h_index": h, "collaborations": collab,
                        "litigation_success": round(rng.random(), 2)})
        return out

    def claims(self, cpc4, kinds, planted):
        rng = self.rng
        claims, truth_kinds = [], []
        for kind, preamble in kinds:
            if planted:
                body = ("a NAND flash array storing weights of a neural network; a sense circuit configured to "
                        "accumulate bit line currents as multiply accumulate results; and a controller configured "
                        "to schedule inference layers across memory planes.")
                extras = ["the controller gates unused planes", "the sense circuit quantizes to four bits",
                          "the weights are refreshed after retention loss"]
            else:
                lims = rng.sample(LIMITATIONS[cpc4], 3)
                body = f"{lims[0]}; {lims[1]}; and {lims[2]}."
                extras = LIMITATIONS[cpc4]
            parent = len(claims) + 1
            claims.append({"number": parent, "text": f"{preamble} comprising: {body}"})
            truth_kinds.append(kind)
            noun = preamble.split(" ", 1)[1]
            for _ in range(rng.randrange(1, 4)):
                link = "wherein" if planted else "further comprising"
                claims.append({"number": len(claims) + 1,
                               "text": f"The {noun} of claim {parent}, {link} {rng.choice(extras)}."})
        return claims, truth_kinds

    def record(self, cpc4, *, planted=False, status="Granted", young=False, old=False, drop_fields=()):
        rng = self.rng
        pending = status == "Pending"
        pid = self.next_id(pending)
        if planted:
            filing = rand_date(rng, dt.date(2021, 2, 1), dt.date(2021, 12, 28))
        elif young or pending:
            filing = rand_date(rng, dt.date(2021, 2, 1), dt.date(2024, 6, 28))
        elif old:
            filing = rand_date(rng, dt.date(2000, 1, 1), dt.date(2005, 6, 28))
        else:
            filing = rand_date(rng, dt.date(2007, 1, 1), dt.date(2020, 12, 28))
        filing = filing.replace(day=min(filing.day, 28))
        grant = None
        if not pending and status != "Abandoned":
            grant = filing + dt.timedelta(days=rng.randrange(500, 1300))
            if grant >= EVAL:
                grant = EVAL - dt.timedelta(days=rng.randrange(30, 200))
                if grant < filing:
                    grant = filing
        expiry = add_years(filing, 20)

        subgroup = rng.choice(CPC_SUBGROUPS[cpc4])
        cpcs = [subgroup] + ([rng.choice(CPC_SUBGROUPS[rng.choice(list(CPC_SUBGROUPS))])] if rng.random() < 0.4 else [])

        if planted:
            title = rng.choice(PLANTED_TITLES)
            abstract = f"There is a need for {PLANTED_NEED}. {rng.choice(PLANTED_DETAILS)}"
            kinds = [("product", "A memory device")] + ([("process", "A method of operating a memory device")]
                                                        if rng.random() < 0.5 else [])
        else:
            topic = rng.choice(TOPICS[cpc4])
            detail = rng.choice(DETAILS[cpc4])
            title = topic[0].upper() + topic[1:]
            if rng.random() < 0.75:
                abstract = f"There is a need for {topic}. {detail}"
            else:
                abstract = f"{detail} The approach targets {topic}."
            options = PREAMBLES[cpc4]
            kinds = [rng.choice(options)]
            if rng.random() < 0.3:
                other = [o for o in options if o != kinds[0]]
                kinds.append(rng.choice(other))
        claims, claim_kinds = self.claims(cpc4, kinds, planted)

        published = grant or filing
        if planted:
            n_cites = rng.randrange(18, 31)
            cite_dates = [rand_date(rng, dt.date(2023, 3, 1), dt.date(2025, 12, 20)) for _ in range(n_cites)]
        else:
            n_cites = rng.randrange(0, 13)
            cite_dates = [rand_date(rng, published, EVAL) for _ in range(n_cites)]
        cite_dates = [d for d in cite_dates if d >= published] if not planted else cite_dates
        cites = [{"citing_id": f"US-{rng.randrange(10**7, 10**8)}-B1", "date": iso(d)} for d in sorted(cite_dates)]

        n_fam = rng.randrange(8, 15) if planted else rng.randrange(0, 6)
        family = [f"{rng.choice(['JP', 'KR', 'CN', 'DE', 'TW'])}-{rng.randrange(10**6, 10**7)}" for _ in range(n_fam)]
        if planted:
            countries = ["USA"] + rng.sample(["JPN", "KOR", "CHN", "DEU", "TWN"], rng.randrange(4, 6))
            juris = [{"country": c, "status": "granted"} for c in countries]
        else:
            countries = ["USA"] + rng.sample(["JPN", "KOR", "CHN", "DEU", "GBR", "FRA"], rng.randrange(0, 3))
            juris = [{"country": c, "status": "granted" if (grant and rng.random() < 0.7) else "pending"}
                     for c in countries]

        inventors = self.inventors(rng.randrange(1, 5), planted)
        litigation = []
        if rng.random() < 0.12:
            for _ in range(rng.randrange(1, 3)):
                litigation.append({"outcome": rng.choice(list(LIT_WEIGHTS)),
                                   "case_value": float(rng.randrange(1, 40)) * 1e6})
        reassignments = []
        for _ in range(rng.randrange(0, 3)):
            reassignments.append({"date": iso(rand_date(rng, filing, EVAL - dt.timedelta(days=1))),
                                  "from": "SanDisk 3D LLC", "to": "SanDisk Technologies, Inc."})
        rejections = {"n102": rng.randrange(0, 3), "n103": rng.randrange(0, 4), "n112": rng.randrange(0, 3)}

        metrics = {
            "TRL": float(rng.randrange(3, 10)),
            "MRL": float(rng.randrange(2, 11)),
            "R_mat": round(rng.random(), 3),
            "R_mfg": round(rng.random(), 3),
            "R_work": round(rng.random(), 3),
            "N_comp": float(rng.randrange(2, 9) if planted else rng.randrange(0, 20)),
            "N_app": float(rng.randrange(1, 12)),
            "T_market": round(rng.uniform(0.5, 5.0), 2),
            "P_cost": round(rng.uniform(-0.5, 0.5), 3),
            "S_mfg": round(rng.uniform(0, 1), 3),
            "S_invest": round(rng.uniform(0, 1), 3),
            "N_launch": float(rng.randrange(0, 6)),
            "S_owner": round(rng.uniform(0, 1), 3),
            "S_forecast": round(rng.uniform(-1, 1), 3),
        }
        if not planted and rng.random() < 0.15:
            for k in rng.sample(sorted(metrics), 2):
                del metrics[k]
        if not planted and rng.random() < 0.1:
            metrics["market_start"] = float(rng.randrange(10, 50)) * 1e8
            metrics["market_end"] = metrics["market_start"] * rng.uniform(1.0, 2.0)
            metrics["market_years"] = float(rng.randrange(3, 8))
        if not planted and rng.random() < 0.1:
            metrics["V_TAM"] = float(rng.randrange(1, 90)) * 1e9

        rec = OrderedDict()
        rec["patent_id"] = pid
        rec["title"] = title
        rec["abstract"] = abstract
        rec["claims"] = claims
        rec["filing_date"] = iso(filing)
        rec["grant_date"] = iso(grant)
        rec["expiry_date"] = iso(expiry)
        rec["legal_status"] = status
        rec["assignee_raw"] = rng.choice(ASSIGNEES)
        rec["inventors"] = inventors
        rec["cpc_codes"] = cpcs
        rec["family_members"] = family
        rec["jurisdictions"] = juris
        rec["forward_citations"] = cites
        rec["backward_citations"] = [f"US-{rng.randrange(10**6, 10**7)}" for _ in range(rng.randrange(0, 15))]
        rec["examiner_citations"] = [f"US-{rng.randrange(10**6, 10**7)}" for _ in range(rng.randrange(0, 6))]
        rec["reassignments"] = reassignments
        rec["litigation_events"] = litigation
        rec["rejection_events"] = rejections
        rec["cip_flag"] = rng.random() < 0.1
        rec["direct_metrics"] = metrics
        for f in drop_fields:
            del rec[f]
        self.truth[pid] = {"claim_kinds": claim_kinds, "planted": planted}
        return rec


def oracle_vector(rec, claim_kinds):
    """Independent computation of the 33 parameter slots."""
    vals, missing = {}, set()
    present = lambda f: f in rec

    def d(s):
        return dt.date.fromisoformat(s)

    filing = d(rec["filing_date"])
    grant = d(rec["grant_date"]) if rec["grant_date"] else None
    expiry = d(rec["expiry_date"]) if rec["expiry_date"] else None
    metrics = rec.get("direct_metrics", {})
    market = MARKET.get(rec["cpc_codes"][0][:4])

    if expiry:
        vals["L_rem"] = (expiry - EVAL).days / DAYS_PER_YEAR
    else:
        missing.add("L_rem")
    vals["S_claim"] = max(CLAIM_SCORES[k] for k in claim_kinds)
    for name, field in [("N_fam", "family_members"), ("N_reassign", "reassignments"),
                        ("N_bcite", "backward_citations"), ("N_ecite", "examiner_citations")]:
        if present(field):
            vals[name] = float(len(rec[field]))
        else:
            missing.add(name)
    if present("forward_citations"):
        window = 3 * DAYS_PER_YEAR
        n = sum(1 for c in rec["forward_citations"] if 0 <= (EVAL - d(c["date"])).days < window)
        if n == 0:
            vals["V_cite"] = 0.0
        else:
            years = (EVAL - (grant or filing)).days / DAYS_PER_YEAR
            vals["V_cite"] = n / max(years, 0.25)
    else:
        missing.add("V_cite")
    if present("litigation_events"):
        vals["S_litigation"] = sum(LIT_WEIGHTS[e["outcome"]] * e["case_value"] for e in rec["litigation_events"])
    else:
        missing.add("S_litigation")
    vals["S_trend"] = cagr(market["filings_start"], market["filings_end"], market["horizon_years"])
    if grant:
        vals["T_pend"] = (grant - filing).days / DAYS_PER_MONTH
    else:
        missing.add("T_pend")
    invs = rec.get("inventors", [])
    if invs:
        vals["S_inv"] = sum(0.5 * i["h_index"] + 0.3 * math.log(i["collaborations"]) + 0.2 * i["litigation_success"]
                            for i in invs) / len(invs)
    else:
        missing.add("S_inv")
    if present("rejection_events"):
        r = rec["rejection_events"]
        vals["S_rej"] = 1.0 * r["n102"] + 0.6 * r["n103"] + 0.2 * r["n112"]
    else:
        missing.add("S_rej")
    vals["S_CIP"] = 1.0 if rec.get("cip_flag") else 0.0
    for name in ["TRL", "MRL", "P_cost", "T_market", "N_app", "N_comp", "S_mfg", "S_invest", "N_launch",
                 "S_owner", "S_forecast"]:
        if name in metrics:
            vals[name] = metrics[name]
        else:
            missing.add(name)
    vals["V_TAM"] = metrics.get("V_TAM", market["tam_usd"])
    vals["V_rev"] = metrics.get("V_rev", market["revenue_usd"])
    if all(k in metrics for k in ("market_start", "market_end", "market_years")):
        vals["CAGR_tech"] = cagr(metrics["market_start"], metrics["market_end"], metrics["market_years"])
    else:
        vals["CAGR_tech"] = cagr(market["market_start"], market["market_end"], market["horizon_years"])
    if present("jurisdictions"):
        usa = GNI["USA"]
        vals["S_juris"] = sum(GNI[j["country"]] / usa * STATUS_FACTOR[j["status"]] for j in rec["jurisdictions"])
    else:
        missing.add("S_juris")
    if all(k in metrics for k in ("R_mat", "R_mfg", "R_work")):
        vals["S_sc"] = 0.4 * metrics["R_mat"] + 0.4 * metrics["R_mfg"] + 0.2 * metrics["R_work"]
    else:
        missing.add("S_sc")
    vals["S_demand"] = snr_db(market["signal_power"], market["noise_power"])
    vals["S_partner"] = sum(PARTNER_WEIGHTS[k] * n for k, n in market["partnership_counts"].items())
    if "deals_value_usd" in market and "deals_count" in market:
        vals["S_MA"] = math.log1p(market["deals_value_usd"]) + 0.1 * market["deals_count"]
    else:
        missing.add("S_MA")
    missing.add("S_NeedSeed")
    for name in missing:
        vals[name] = 0.0
    return OrderedDict((n, vals[n]) for n in PARAM_NAMES), sorted(missing, key=PARAM_NAMES.index)


def maturity(l_rem):
    if l_rem > 15:
        return "GT15"
    if l_rem >= 10:
        return "Y10to15"
    if l_rem >= 5:
        return "Y5to10"
    return "LT5"


def oracle_categories(records, vectors):
    trends = sorted(vectors[r["patent_id"]]["S_trend"] for r in records)
    n = len(trends)
    q1, q2 = trends[-(-n // 3) - 1], trends[-(-2 * n // 3) - 1]
    groups = {}
    keys = {}
    for r in records:
        v = vectors[r["patent_id"]]
        t = v["S_trend"]
        growth = "Low" if t <= q1 else ("Medium" if t <= q2 else "High")
        key = f"{r['cpc_codes'][0][:4]}:{maturity(v['L_rem'])}:{growth}"
        keys[r["patent_id"]] = key
        groups.setdefault(key, []).append(r["patent_id"])
    cats = []
    for key in sorted(groups, key=category_sort_key):
        members = sorted(groups[key])
        mean = lambda p: sum(vectors[m][p] for m in members) / len(members)
        cats.append(OrderedDict([("key", key), ("members", members), ("mean_l_rem", mean("L_rem")),
                                 ("mean_s_trend", mean("S_trend")), ("mean_v_tam", mean("V_TAM")),
                                 ("mean_cagr_tech", mean("CAGR_tech"))]))
    lo = min(c["mean_v_tam"] for c in cats)
    hi = max(c["mean_v_tam"] for c in cats)
    w1, w2, w3, w4 = QUICK_MONETIZATION_WEIGHTS
    for c in cats:
        c["v_tam_scaled"] = (c["mean_v_tam"] - lo) / (hi - lo) if hi > lo else 0.0
        c["s_cat_quick_monetization"] = (w1 * c["mean_l_rem"] + w2 * c["mean_s_trend"] + w3 * c["v_tam_scaled"]
                                         + w4 * c["mean_cagr_tech"])
    return cats, keys, (q1, q2)


MATURITY_ORDER = ["GT15", "Y10to15", "Y5to10", "LT5"]
GROWTH_ORDER = ["Low", "Medium", "High"]


def category_sort_key(key):
    cpc, m, g = key.split(":")
    return (cpc, MATURITY_ORDER.index(m), GROWTH_ORDER.index(g))


# Each entry: (doc_id, source, date, [sentences]); a sentence is either
# plain filler or (surface_entity, verb, phrase) that must yield a triple.
NEED_DOCS = [
    ("NC-001", "News", "2022-05-10", [
        "Analysts covering handset makers were cautious this spring.",
        ("Hanul Electronics", "needs", PLANTED_NEED),
    ]),
    ("NC-002", "EarningsCall", "2025-07-24", [
        "Revenue grew in the mobile division this quarter.",
        ("Hanul Electronics", "needs", PLANTED_NEED),
        "Capital spending will remain flat.",
        ("Hanul Electronics", "is struggling with", "reducing battery degradation at high charge rates"),
    ]),
    ("NC-003", "News", "2025-09-02", [
        "Industry sources say",
        ("HANUL Electronics Co", "needs", PLANTED_NEED + " for its next handset line"),
    ]),
    ("NC-004", "Blog", "2025-11-15", [
        "A teardown suggests",
        ("Hanul Electronics", "seeks", "energy efficient neural network inference in NAND flash memory"),
    ]),
    ("NC-005", "News", "2025-04-04", [
        ("Hanul Electronics", "seeks", "thinner camera modules for foldable phones"),
    ]),
    ("NC-006", "News", "2025-05-10", [
        "Supply contracts were renewed in May.",
        ("Mirae Motors", "seeks", "faster recycling of lithium cathode scrap"),
    ]),
    ("NC-007", "Blog", "2025-10-01", [
        "According to a supplier,",
        ("Mirae Motors Corp", "seeks", "faster recycling of lithium cathode scrap"),
    ]),
    ("NC-008", "MarketReport", "2025-03-03", [
        "Spending on regional infrastructure rose sharply.",
        ("Daebong Telecom", "is investing in", "sovereign cloud data centers"),
    ]),
    ("NC-009", "RegulatoryFiling", "2024-11-20", [
        ("Kestrel Avionics", "is constrained by", "certification delays for cockpit displays"),
    ]),
    ("NC-010", "Blog", "2025-08-08", [
        "Rural distribution remains patchy.",
        ("Orion Foods", "is looking for", "cold chain visibility across rural depots"),
    ]),
    ("NC-011", "News", "2025-12-02", [
        "Quarterly shipments slipped on weak demand.",
        "Prices for legacy parts stayed low.",
    ]),
]


def build_needs():
    docs, triples = [], []
    for doc_id, source, date, sentences in NEED_DOCS:
        text = ""
        for s in sentences:
            if text:
                text += " "
            if isinstance(s, tuple):
                ent, verb, phrase = s
                offset = len(text.encode("utf-8"))
                text += f"{ent} {verb} {phrase}."
                triples.append({"subject": canonicalize(ent), "object": phrase, "doc": doc_id,
                                "source": source, "date": date, "offset": offset})
            else:
                text += s
        docs.append(OrderedDict([("doc_id", doc_id), ("source_type", source), ("date", date), ("text", text)]))
    return docs, triples


def oracle_needs(triples):
    ordered = sorted(triples, key=lambda t: (t["subject"], t["date"], t["doc"], t["offset"]))
    clusters = []
    for t in ordered:
        toks = set(content_tokens(t["object"]))
        for c in clusters:
            if c["subject"] == t["subject"] and jaccard(c["founding"], toks) >= 0.6:
                c["members"].append(t)
                break
        else:
            clusters.append({"subject": t["subject"], "founding": toks, "members": [t]})
    start = EVAL - dt.timedelta(days=730)
    nodes = []
    for i, c in enumerate(clusters):
        in_window = sum(1 for t in c["members"] if start < dt.date.fromisoformat(t["date"]) <= EVAL)
        terms = sorted(set().union(*(set(content_tokens(t["object"])) for t in c["members"])))
        nodes.append(OrderedDict([
            ("need_id", f"N{i + 1:03d}"),
            ("entity", c["subject"]),
            ("description", c["members"][0]["object"]),
            ("n_triples", len(c["members"])),
            ("mentions_in_window", in_window),
            ("demand_db", snr_db(in_window, 1.0)),
            ("authority", max(AUTHORITY[t["source"]] for t in c["members"])),
            ("key_terms", terms),
        ]))
    return nodes


def dump_json(path, value):
    with open(path, "w") as f:
        json.dump(value, f, indent=2)
        f.write("\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.dirname(os.path.abspath(__file__)))
    args = ap.parse_args()
    out = args.out
    os.makedirs(os.path.join(out, "oracle"), exist_ok=True)

    g = Gen(SEED)
    rng = g.rng
    plan = []
    plan += [("G11C", dict(planted=True))] * 12
    plan += [("G11C", dict(young=True))] * 8 + [("G11C", dict(status="Pending"))] * 3 + [("G11C", {})] * 27
    plan += [("H10B", dict(young=True))] * 4 + [("H10B", dict(status="Pending"))] * 2 + [("H10B", {})] * 14
    plan += [("G06F", dict(young=True))] * 5 + [("G06F", dict(status="Pending"))] * 2 + [("G06F", {})] * 28
    plan += [("H01L", dict(young=True))] * 3 + [("H01L", dict(status="Pending"))] * 1 + [("H01L", {})] * 26
    plan += [("H04L", dict(young=True))] * 2 + [("H04L", {})] * 16
    plan += [("G06N", dict(young=True))] * 6 + [("G06N", dict(status="Pending"))] * 2 + [("G06N", {})] * 10
    dropped_statuses = ["Lapsed", "Expired", "Abandoned", "Invalidated"]
    for i in range(19):
        status = dropped_statuses[i % 4]
        cpc = list(CPC_SUBGROUPS)[i % 6]
        plan.append((cpc, dict(status=status, old=(status == "Expired"))))

    optional = ["litigation_events", "rejection_events", "examiner_citations", "reassignments", "jurisdictions"]
    records = []
    for cpc, kw in plan:
        drops = ()
        if not kw.get("planted") and rng.random() < 0.08:
            drops = (rng.choice(optional),)
        records.append(g.record(cpc, drop_fields=drops, **kw))
    order = list(range(len(records)))
    rng.shuffle(order)
    records = [records[i] for i in order]

    # Ids are handed out after shuffling so their order says nothing about
    # the planted set; the headline planted patent keeps a known number.
    truth = {}
    g.serial = 10_000_000
    headline_done = False
    for r in records:
        old = r["patent_id"]
        t = g.truth[old]
        if t["planted"] and not headline_done:
            new = "US-11170290-B2"
            headline_done = True
        else:
            new = g.next_id(r["legal_status"] == "Pending")
        r["patent_id"] = new
        truth[new] = t
    g.truth = truth
    planted_ids = sorted(p for p, t in truth.items() if t["planted"])
    assert len(set(r["patent_id"] for r in records)) == len(records)

    with open(os.path.join(out, "sandisk_mini.jsonl"), "w") as f:
        for r in records:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")

    kept = [r for r in records if r["legal_status"] in ("Granted", "Pending")]
    dropped = sorted(r["patent_id"] for r in records if r["legal_status"] not in ("Granted", "Pending"))

    vectors, masks = {}, {}
    with open(os.path.join(out, "oracle", "vectors.jsonl"), "w") as f:
        for r in sorted(kept, key=lambda r: r["patent_id"]):
            vals, missing = oracle_vector(r, g.truth[r["patent_id"]]["claim_kinds"])
            vectors[r["patent_id"]] = vals
            masks[r["patent_id"]] = missing
            f.write(json.dumps(OrderedDict([("patent_id", r["patent_id"]), ("values", vals),
                                            ("missing", missing)])) + "\n")

    cats, keys, cuts = oracle_categories(kept, vectors)
    dump_json(os.path.join(out, "oracle", "categories.json"),
              OrderedDict([("tertiles", list(cuts)), ("categories", cats)]))

    docs, triples = build_needs()
    with open(os.path.join(out, "needs_corpus.jsonl"), "w") as f:
        for d in docs:
            f.write(json.dumps(d) + "\n")
    nodes = oracle_needs(triples)
    dump_json(os.path.join(out, "oracle", "need_nodes.json"), nodes)

    # Labels: planted patents are the relevant set; everything else is
    # graded by a composite of signals a licensing analyst would weigh.
    def composite(v):
        clip = lambda x: max(0.0, min(1.0, x))
        return (0.30 * clip(v["V_cite"] / 8.0) + 0.25 * clip(v["S_inv"] / 20.0) + 0.15 * clip(v["N_fam"] / 10.0)
                + 0.15 * clip(v["S_juris"] / 3.0) + 0.15 * clip(v["L_rem"] / 20.0))

    labels = []
    for pid in sorted(vectors):
        if pid in planted_ids:
            grade = 4
        else:
            z = composite(vectors[pid])
            grade = 0 if z < 0.2 else 1 if z < 0.3 else 2 if z < 0.4 else 3
        labels.append(OrderedDict([("query_id", keys[pid]), ("patent_id", pid), ("grade", grade)]))
    labels.sort(key=lambda l: (l["query_id"], l["patent_id"]))
    with open(os.path.join(out, "labels.jsonl"), "w") as f:
        for l in labels:
            f.write(json.dumps(l) + "\n")

    planted_node = next(n for n in nodes if n["description"] == PLANTED_NEED)
    demands = [n["demand_db"] for n in nodes]
    lo, hi = min(demands), max(demands)
    dn = (planted_node["demand_db"] - lo) / (hi - lo) if hi > lo else 1.0
    fit = round(100 * dn * (0.7 * 1.0 + 0.3 * planted_node["authority"]))
    dump_json(os.path.join(out, "expected.json"), OrderedDict([
        ("evaluation_date", EVAL.isoformat()),
        ("n_records", len(records)),
        ("planted_patent_ids", planted_ids),
        ("dropped_patent_ids", dropped),
        ("planted_need_id", planted_node["need_id"]),
        ("planted_need_entity", planted_node["entity"]),
        ("planted_need_description", PLANTED_NEED),
        ("planted_fit_score", fit),
        ("planted_category", keys["US-11170290-B2"]),
    ]))

    with open(os.path.join(out, "gni.csv"), "w") as f:
        f.write("iso3,gni_usd\n")
        for k, v in GNI.items():
            f.write(f"{k},{v:.0f}\n")
    dump_json(os.path.join(out, "market.json"), MARKET)
    with open(os.path.join(out, "aliases.csv"), "w") as f:
        f.write("pattern,canonical\n")
        for p, c in ALIASES:
            f.write(f"\"{p}\",{c}\n")
    with open(os.path.join(out, "patterns.txt"), "w") as f:
        f.write("# Relation | template\n")
        f.write("StrugglesWith | <ENT> is struggling with <PHRASE>\n")
        f.write("Seeks | <ENT> seeks <PHRASE>\n")
        f.write("Seeks | <ENT> is looking for <PHRASE>\n")
        f.write("Needs | <ENT> needs <PHRASE>\n")
        f.write("InvestingIn | <ENT> is investing in <PHRASE>\n")
        f.write("ConstrainedBy | <ENT> lacks <PHRASE>\n")
        f.write("ConstrainedBy | <ENT> is constrained by <PHRASE>\n")
    with open(os.path.join(out, "broad_terms.txt"), "w") as f:
        f.write("\n".join(["means", "member", "element", "mechanism", "unit", "component", "assembly",
                           "circuitry", "module", "plurality"]) + "\n")
    with open(os.path.join(out, "params.toml"), "w") as f:
        f.write("""citation_window_years = 3.0
velocity_floor_years = 0.25
demand_floor_db = -60.0

[rejection_weights]
w102 = 1.0
w103 = 0.6
w112 = 0.2

[claim_type_scores]
product = 1.0
process = 0.7
composition = 0.5
unknown = 0.0

[litigation_weights]
plaintiff_win = 1.0
settlement = 0.5
defendant_win = 0.0

[inventor]
alpha = 0.5
beta = 0.3
gamma = 0.2

[supply_chain]
materials = 0.4
manufacturing = 0.4
workforce = 0.2

[ma]
alpha = 1.0
beta = 0.1

[partnership_weights]
JointVenture = 1.0
Licensing = 0.7
MoU = 0.3

[jurisdiction_status]
granted = 1.0
pending = 0.7
""")
    with open(os.path.join(out, "profiles.toml"), "w") as f:
        f.write("""[profiles.LicensingSprint]
category_weights = [0.3, 0.1, 0.4, 0.2]

[profiles.LicensingSprint.feature_multipliers]
S_MA = 2.0
S_partner = 2.0
""")
    with open(os.path.join(out, "run.toml"), "w") as f:
        f.write("""evaluation_date = "2026-01-01"
profile = "QuickMonetization"
select_categories = ["*"]
top_n = 30

[inputs]
portfolio = "sandisk_mini.jsonl"
market = "market.json"
gni = "gni.csv"
needs_corpus = "needs_corpus.jsonl"
model = "model.json"
aliases = "aliases.csv"
patterns = "patterns.txt"
broad_terms = "broad_terms.txt"
params = "params.toml"
profiles = "profiles.toml"
""")
    print(f"{len(records)} records, {len(dropped)} dropped, {len(planted_ids)} planted, {len(nodes)} needs, fit {fit}")


if __name__ == "__main__":
    main()
