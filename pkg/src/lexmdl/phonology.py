"""Articulatory feature system and per-feature phone generation.

Phonemes and phones share one inventory of feature bundles.  A phone is
generated feature by feature (in chart order, so that applicability of a
feature can depend on values already chosen) and the resulting product
distribution is renormalized over the phones that actually exist.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

_logger = logging.getLogger(__name__)

# (name, values, mu, alpha)
FEATURES: Tuple[Tuple[str, Tuple[str, ...], float, int], ...] = (
    ("consonantal", ("silence", "C", "V", "laryngeal"), 0.0, 0),
    ("continuant", ("stop", "fric", "sonorant"), 0.01, 1),
    ("sonority", ("lateral", "rhotic", "glide"), 0.0, 0),
    ("articulator", ("lab", "cor", "dors"), 0.0, 1),
    ("anterior", ("+a", "-a"), 0.02, 1),
    ("distributed", ("+d", "-d"), 0.02, 1),
    ("nasality", ("+n", "-n"), 0.01, 1),
    ("voicing", ("+v", "-v"), 0.01, 1),
    ("reduced", ("reduced", "full"), 0.15, 0),
    ("high", ("+h", "-h"), 0.01, 0),
    ("back", ("+b", "-b"), 0.01, 0),
    ("low", ("+l", "-l"), 0.01, 0),
    ("round", ("+r", "-r"), 0.01, 0),
    ("ATR", ("+ATR", "-ATR"), 0.01, 0),
)

FEATURE_NAMES = tuple(f[0] for f in FEATURES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
_VALUE_FEATURE = {v: f[0] for f in FEATURES for v in f[1]}

# symbol, IPA glyph, example word, feature values
INVENTORY_CHART: Tuple[Tuple[str, str, str, str], ...] = (
    ("b", "b", "bee", "C,stop,lab,-n,-v"),
    ("p", "p", "pea", "C,stop,lab,-n,+v"),
    ("d", "d", "day", "C,stop,cor,-n,-v,+a,-d"),
    ("t", "t", "tea", "C,stop,cor,-n,+v,+a,-d"),
    ("g", "g", "gay", "C,stop,dors,-n,-v"),
    ("k", "k", "key", "C,stop,dors,-n,+v"),
    ("jh", "ǰ", "joke", "C,fric,cor,-v,-a,-d"),
    ("ch", "č", "choke", "C,fric,cor,+v,-a,-d"),
    ("s", "s", "sea", "C,fric,cor,-v,+a,-d"),
    ("sh", "š", "she", "C,fric,cor,-v,-a,+d"),
    ("z", "z", "zone", "C,fric,cor,+v,+a,-d"),
    ("zh", "ž", "azure", "C,fric,cor,+v,-a,+d"),
    ("f", "f", "fin", "C,fric,lab,-v"),
    ("v", "v", "van", "C,fric,lab,+v"),
    ("th", "θ", "thin", "C,fric,cor,-v,+a,+d"),
    ("dh", "ð", "then", "C,fric,cor,+v,+a,+d"),
    ("m", "m", "mom", "C,stop,lab,+n"),
    ("n", "n", "noon", "C,stop,cor,+n,+a,-d"),
    ("ng", "ŋ", "sing", "C,stop,dors,+n"),
    ("l", "l", "lay", "C,sonorant,lateral"),
    ("r", "r", "ray", "C,sonorant,rhotic"),
    ("w", "w", "way", "C,sonorant,glide,lab"),
    ("y", "y", "yacht", "C,sonorant,glide,cor,+a,-d"),
    ("hh", "h", "hay", "laryngeal,-v"),
    ("hv", "ɦ", "ahead", "laryngeal,+v"),
    ("ih", "ɪ", "bit", "V,full,+h,-l,-b,-r,-ATR"),
    ("iy", "i", "beet", "V,full,+h,-l,-b,-r,+ATR"),
    ("uh", "ʊ", "book", "V,full,+h,-l,+b,+r,-ATR"),
    ("uw", "u", "boot", "V,full,+h,-l,+b,+r,+ATR"),
    ("eh", "ɛ", "bet", "V,full,-h,-l,-b,-r,-ATR"),
    ("ey", "e", "base", "V,full,-h,-l,-b,-r,+ATR"),
    ("ah", "ʌ", "but", "V,full,-h,-l,+b,-r"),
    ("ow", "o", "bone", "V,full,-h,-l,+b,+r"),
    ("ae", "æ", "bat", "V,full,-h,+l,-b,-r"),
    ("aa", "a", "bob", "V,full,-h,+l,+b,-r"),
    ("ao", "ɔ", "bought", "V,full,-h,+l,+b,+r"),
    ("ix", "ɨ", "roses", "V,reduced,+h"),
    ("ax", "ə", "about", "V,reduced,-h"),
    ("sil", "-", "(silence)", "silence"),
)

SYMBOLS: Tuple[str, ...] = tuple(row[0] for row in INVENTORY_CHART)
SYMBOL_INDEX: Dict[str, int] = {s: i for i, s in enumerate(SYMBOLS)}

# keyboard shorthands accepted on input; output always uses SYMBOLS
ALIASES: Dict[str, str] = {
    "u": "uw", "i": "iy", "e": "ey", "o": "ow", "a": "aa",
    "j": "jh", "h": "hh", "-": "sil",
}


def lookup_symbol(name: str) -> int:
    """Map a phoneme mnemonic (or alias) to its inventory index."""
    canon = ALIASES.get(name, name)
    try:
        return SYMBOL_INDEX[canon]
    except KeyError:
        raise KeyError(name) from None


def applicable(feature: int, bundle: Mapping[str, str]) -> bool:
    """Whether `feature` is defined given the values already in `bundle`."""
    name = FEATURE_NAMES[feature]
    cons = bundle.get("consonantal")
    if name == "consonantal":
        return True
    if name == "continuant":
        return cons == "C"
    if name == "sonority":
        return bundle.get("continuant") == "sonorant"
    if name == "articulator":
        return cons == "C" and bundle.get("sonority") not in ("lateral", "rhotic")
    if name in ("anterior", "distributed"):
        return bundle.get("articulator") == "cor"
    if name == "nasality":
        return bundle.get("continuant") == "stop"
    if name == "voicing":
        if cons == "laryngeal":
            return True
        return (cons == "C" and bundle.get("continuant") != "sonorant"
                and bundle.get("nasality") != "+n")
    if name in ("reduced", "high"):
        return cons == "V"
    if name in ("low", "back", "round"):
        return cons == "V" and bundle.get("reduced") == "full"
    if name == "ATR":
        if cons != "V" or bundle.get("reduced") != "full":
            return False
        return bundle.get("high") == "+h" or (
            bundle.get("back") == "-b" and bundle.get("low") == "-l")
    raise ValueError(name)


@dataclass(frozen=True)
class PhonemeBundle:
    symbol: str
    values: Tuple[Optional[str], ...]   # one slot per feature; None if undefined

    def __getitem__(self, feature: str) -> Optional[str]:
        return self.values[FEATURE_INDEX[feature]]

    def as_dict(self) -> Dict[str, str]:
        return {FEATURE_NAMES[i]: v for i, v in enumerate(self.values) if v is not None}


def _parse_bundle(symbol: str, spec: str) -> PhonemeBundle:
    given: Dict[str, str] = {}
    for value in spec.split(","):
        feat = _VALUE_FEATURE[value]
        if feat in given:
            raise ValueError(f"{symbol}: feature {feat} given twice")
        given[feat] = value
    values: List[Optional[str]] = []
    resolved: Dict[str, str] = {}
    for i, name in enumerate(FEATURE_NAMES):
        if applicable(i, resolved):
            if name not in given:
                raise ValueError(f"{symbol}: applicable feature {name} missing")
            resolved[name] = given[name]
            values.append(given[name])
        else:
            if name in given:
                raise ValueError(f"{symbol}: feature {name} is not applicable")
            values.append(None)
    return PhonemeBundle(symbol, tuple(values))


BUNDLES: Tuple[PhonemeBundle, ...] = tuple(
    _parse_bundle(sym, spec) for sym, _, _, spec in INVENTORY_CHART)


def bundle(symbol: str) -> PhonemeBundle:
    return BUNDLES[lookup_symbol(symbol)]


@dataclass
class ChannelParams:
    """Constants of the phoneme-to-phone transducer and feature model."""

    c_I: float = 0.05
    c_M: float = 0.05
    c_D: float = 0.9
    beta_u: float = 1.0
    beta_q: float = 0.15
    beta_n: float = 0.15
    mu: Dict[str, float] = field(default_factory=dict)   # per-feature overrides
    strict_appendix_a: bool = False

    def validate(self) -> "ChannelParams":
        if not 0.0 <= self.c_I < 1.0:
            raise ValueError(f"c_I must lie in [0, 1), got {self.c_I}")
        if not 0.0 <= self.c_M < 1.0:
            raise ValueError(f"c_M must lie in [0, 1), got {self.c_M}")
        if not 0.0 <= self.c_D <= 1.0:
            raise ValueError(f"c_D must lie in [0, 1], got {self.c_D}")
        for name in ("beta_u", "beta_q", "beta_n"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name, value in self.mu.items():
            if name not in FEATURE_INDEX:
                raise ValueError(f"unknown feature in mu overrides: {name}")
            if value < 0:
                raise ValueError(f"mu.{name} must be non-negative")
        return self

    def mu_of(self, feature: int) -> float:
        name = FEATURE_NAMES[feature]
        return self.mu.get(name, FEATURES[feature][2])

    @classmethod
    def noiseless(cls) -> "ChannelParams":
        """Parameters under which every phoneme surfaces unchanged."""
        return cls(c_I=0.0, c_M=0.0, c_D=0.0, beta_u=1.0, beta_q=0.0, beta_n=0.0,
                   mu={name: 0.0 for name in FEATURE_NAMES})

    def with_overrides(self, **kw) -> "ChannelParams":
        return replace(self, **kw)


def _feature_weights(feature: int, kind: str, q: Optional[str], u: Optional[str],
                     n: Optional[str], params: ChannelParams) -> np.ndarray:
    """Unnormalized weights over the values of one feature."""
    values = FEATURES[feature][1]
    mu = params.mu_of(feature)
    alpha = FEATURES[feature][3]
    w = np.full(len(values), mu)
    if kind == "insert":
        return np.ones(len(values))
    for j, v in enumerate(values):
        if v == u:
            w[j] += params.beta_u
        if alpha and v == q:
            w[j] += params.beta_q
        if kind == "copy" and alpha:
            other = q if params.strict_appendix_a else n
            if v == other:
                w[j] += params.beta_n
    return w


def feature_distribution(feature: int, kind: str, q: Optional[str] = None,
                         u: Optional[str] = None, n: Optional[str] = None,
                         params: Optional[ChannelParams] = None) -> np.ndarray:
    """Conditional distribution over one feature's values.

    `kind` is one of "insert", "map", "copy".  Context values are the
    feature values of the previous phone, underlying phoneme and next
    phoneme (None where undefined or absent).  A context in which every
    weight is zero (mu = 0 and no delta fires) falls back to uniform.
    """
    params = params or ChannelParams()
    w = _feature_weights(feature, kind, q, u, n, params)
    z = w.sum()
    if z <= 0.0:
        return np.full(len(w), 1.0 / len(w))
    return w / z


class PhoneModel:
    """Insert / map / copy phone distributions over a (sub)inventory.

    Tables are indexed by local phone index; index `P` (== number of
    phones) stands for the absent context (no previous phone, or no next
    phoneme).

    Attributes:
        p_insert_table: shape (P,)
        p_map_table: shape (P+1, P, P) indexed [q, u, s]
        p_copy_table: shape (P+1, P, P+1, P) indexed [q, u, n, s]
    """

    def __init__(self, params: Optional[ChannelParams] = None,
                 symbols: Optional[Sequence[str]] = None):
        self.params = (params or ChannelParams()).validate()
        self.symbols: Tuple[str, ...] = tuple(
            ALIASES.get(s, s) for s in (symbols if symbols is not None else SYMBOLS))
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in phone inventory")
        self.index = {s: i for i, s in enumerate(self.symbols)}
        self.bundles = [BUNDLES[SYMBOL_INDEX[s]] for s in self.symbols]
        self.P = len(self.symbols)
        self._build_tables()

    def _codes(self, feature: int) -> np.ndarray:
        """Value code per local phone for one feature; K (=#values) if undefined."""
        values = FEATURES[feature][1]
        k = len(values)
        return np.array([values.index(b.values[feature]) if b.values[feature] is not None
                         else k for b in self.bundles], dtype=np.intp)

    def _build_tables(self) -> None:
        P = self.P
        ins = np.ones(P)
        mp = np.ones((P + 1, P, P))
        cp = np.ones((P + 1, P, P + 1, P))
        for f, (name, values, _, _) in enumerate(FEATURES):
            k = len(values)
            codes = self._codes(f)
            ctx = np.append(codes, k)           # sentinel context has no value
            free = codes < k
            # per-feature lookup tables over value codes (k == undefined)
            t_map = np.empty((k + 1, k + 1, k))
            t_copy = np.empty((k + 1, k + 1, k + 1, k))
            vals = list(values) + [None]
            for qc in range(k + 1):
                for uc in range(k + 1):
                    t_map[qc, uc] = feature_distribution(f, "map", vals[qc], vals[uc], None,
                                                         self.params)
                    for nc in range(k + 1):
                        t_copy[qc, uc, nc] = feature_distribution(
                            f, "copy", vals[qc], vals[uc], vals[nc], self.params)
            s_codes = np.where(free, codes, 0)
            f_ins = np.where(free, 1.0 / k, 1.0)
            ins *= f_ins
            f_map = t_map[ctx[:, None, None], codes[None, :, None], s_codes[None, None, :]]
            mp *= np.where(free[None, None, :], f_map, 1.0)
            f_copy = t_copy[ctx[:, None, None, None], codes[None, :, None, None],
                            ctx[None, None, :, None], s_codes[None, None, None, :]]
            cp *= np.where(free[None, None, None, :], f_copy, 1.0)
        self.insert_raw = ins.copy()
        self.insert_mass = ins.sum()
        self.p_insert_table = ins / ins.sum()
        self.p_map_table = mp / mp.sum(axis=-1, keepdims=True)
        self.p_copy_table = cp / cp.sum(axis=-1, keepdims=True)

    # -- convenience accessors -------------------------------------------------
    def _idx(self, phone, allow_none: bool = False) -> int:
        if phone is None:
            if not allow_none:
                raise ValueError("phone required")
            return self.P
        if isinstance(phone, PhonemeBundle):
            phone = phone.symbol
        if isinstance(phone, str):
            canon = ALIASES.get(phone, phone)
            if canon not in self.index:
                raise KeyError(phone)
            return self.index[canon]
        return int(phone)

    def p_insert(self, s) -> float:
        return float(self.p_insert_table[self._idx(s)])

    def p_map(self, s, q, u) -> float:
        return float(self.p_map_table[self._idx(q, True), self._idx(u), self._idx(s)])

    def p_copy(self, s, q, u, n) -> float:
        return float(self.p_copy_table[self._idx(q, True), self._idx(u),
                                       self._idx(n, True), self._idx(s)])


def dump_chart() -> str:
    """Text rendering of the feature table and the phone inventory."""
    lines = ["feature\tvalues\tmu\talpha"]
    for name, values, mu, alpha in FEATURES:
        lines.append(f"{name}\t{', '.join(values)}\t{mu:g}\t{alpha}")
    lines.append("")
    lines.append("symbol\tipa\texample\tfeatures")
    for (sym, ipa, example, _), b in zip(INVENTORY_CHART, BUNDLES):
        feats = ",".join(v for v in b.values if v is not None)
        lines.append(f"{sym}\t{ipa}\t{example}\t{feats}")
    return "\n".join(lines)
