"""The three published 4-stage Peer triplets and their derived matrices.

Coefficients are stored as decimal strings (16 digits, transcribed verbatim)
and node vectors as exact integer fractions.  Everything else (B, B_N, a, w,
v, structural flags) is reconstructed at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import nilpotent_shift, pascal, vandermonde

__all__ = ["PeerTriplet", "CatalogError", "load_triplet", "derive_b_matrices", "TRIPLET_NAMES"]


class CatalogError(KeyError):
    """Unknown triplet name."""


def _mat(rows):
    return np.array([[float(x) for x in row] for row in rows])


# --- raw coefficient data -------------------------------------------------

_RAW = {
    "AP4o33pa": {
        "order_pair": (3, 3),
        "fsal": False,
        "c": [Fraction(46, 5253), Fraction(29, 51), Fraction(1723, 2193), Fraction(17131, 12189)],
        "A0": [
            ["-1.157765450537458", "4.180419822183092", "-3.571237514138118", "0.4344668789817266"],
            ["9.320046415868424", "-20.43515251977805", "20.53668079758682", "-2.660420735071554"],
            ["-9.502446854904932", "18.14294953408145", "-17.88837560028214", "2.643706254438956"],
            ["1.573865446847084", "-2.968198110625862", "2.201646466132119", "0.1498151692184390"],
        ],
        "K0": [
            ["0.1525423728813559", "0.06343283582089552", "-0.04424778761061947", "0"],
            ["0.2455414494142291", "0.3479528534959272", "0.2643445483279409", "0"],
            ["-0.2389119757586965", "0.3687279250113433", "-0.2354279614690257", "0"],
            ["0.03447092342852595", "-0.05320115087852647", "0.03711064142489613", "0.2479535745634692"],
        ],
        "A": [
            ["0.7073170731707317", "0", "0", "0"],
            ["-1.458044769359054", "2.011111111111111", "0", "0"],
            ["0.8963499143698150", "-3.446643123594083", "2.170212765957447", "0"],
            ["0.08807733909162651", "0.3555507383436048", "-0.8914986166587666", "0.5675675675675676"],
        ],
        "K_diag": ["0.2240817025504534", "0.2911518627633785", "0.2558139534883721", "0.2289524811977960"],
        "R_col4": ["-0.2105994034490964", "0.1876445792137739", "-0.1297946665997080", "0.1527494908350306"],
        "AN": [
            ["0.03570841538693515", "0.4969703797836259", "0", "0"],
            ["2.797947998593283", "-2.717111089179658", "1.827587054105035", "-0.3120359279234260"],
            ["-3.797058467469895", "4.498208855806741", "-2.913725127809472", "0.8173416699480771"],
            ["0.4837073832344139", "0.1093148794369315", "-0.4021296652058669", "0.07527364129327442"],
        ],
        "KN": [
            ["0.2323465386026342", "0.08709000303247828", "0", "0"],
            ["0.0006578497520678987", "-0.2800336616814694", "0", "0"],
            ["-0.0006400881985255662", "0.5062443715754399", "0.32694879378132385", "0"],
            ["0.00009235381026342189", "-0.07304242875763006", "0", "0.01004801943170234"],
        ],
        "RN_col4": ["-0.1751101070505921", "0.2296022411517165", "-0.5247365005443616", "-0.07622773831802632"],
    },
    "AP4o33pfs": {
        "order_pair": (3, 3),
        "fsal": True,
        "c": [Fraction(0), Fraction(9, 86), Fraction(321, 602), Fraction(1)],
        "A0": [
            ["1.333333333333333", "0", "0", "0"],
            ["-2.789814648187671", "2.243282202070159", "0.06686328023669716", "0.01646570267735142"],
            ["4.349477807846901", "-6.391186028966211", "2.276667661951199", "-0.06058221663260115"],
            ["-6.567438826613935", "9.406667237260441", "-4.671899050533916", "1.788163545558252"],
        ],
        "K0_diag": ["0", "0.2868808051464541", "0.4845433642003949", "0.2814200916147642"],
        "A": [
            ["0.7857142857142857", "0", "0", "0"],
            ["-2.028837530067695", "2.203900659027200", "0", "0"],
            ["4.063000939519495", "-6.340099591541239", "2.287165301103365", "0"],
            ["-6.494320028787459", "9.394962342878431", "-4.615533409449387", "1.744047031603003"],
        ],
        "K_diag": ["0", "0.2754665812532002", "0.4295774647887324", "0.2949559539580673"],
        "R_col4": ["0", "0.156340095159149050", "-0.0212049600240154176", "-0.135135135135135135"],
        "AN": [
            ["1", "0", "0", "0"],
            ["-1.037159659693408", "0.4363577782952090", "0.6845553714934806", "-0.2064640160522880"],
            ["0.03605110452225963", "-0.5660510638564654", "-0.1074762596776216", "0.7596425122215622"],
            ["0.001108555171148741", "0.1296932855612564", "-0.5770791118158589", "0.4468215038307258"],
        ],
        "KN": [
            ["0.3333333333333333", "0", "0", "0"],
            ["-0.3406285072951739", "0.1264725806602174", "0", "0"],
            ["0.1282327493289677", "0", "0.5627483658896584", "0"],
            ["-0.03272942952658255", "0", "0", "0.1697266466479663"],
        ],
        "RN_col4": ["0.0463093438915248733", "0.191797796516481359", "-0.286597642859776972", "0.1785714285714285754"],
    },
    "AP4o43p": {
        "order_pair": (4, 3),
        "fsal": False,
        "c": [
            Fraction(4657, 46172),
            Fraction(43, 97),
            Fraction(3991, 6596),
            Fraction(21111803999, 23798723875),
        ],
        "A0": [
            ["7.666666666666667", "-7.952380952380952", "6.428571428571429", "-1.0"],
            ["-37.64573385789864", "46.51465022124085", "-35.34733224501487", "5.556742966495919"],
            ["38.90401308661976", "-51.03310294122830", "39.84674769118604", "-5.987622148721481"],
            ["-9.132039686863960", "14.19615134612322", "-13.42624214739033", "3.410910572594644"],
        ],
        "K0": [
            ["0.2201309814534140", "-0.001685331083118719", "0.03214426130560293", "0"],
            ["0.1111845986702137", "0.4311745541022918", "-0.1774967804652712", "0"],
            ["-0.1188243074116737", "-0.009945644225626329", "0.2279954173163067", "0"],
            ["0.02777498546842700", "0.002324777899894389", "-0.04434040826768050", "0.2883852220354272"],
        ],
        "A": [
            ["2.080437513028435", "0", "0", "0"],
            ["-6.582767809460944", "2.843481487726957", "0", "0"],
            ["5.640064091163237", "-4.381563545251576", "2.010790683327275", "0"],
            ["-1.344827586206897", "3.263399731279439", "-4.509045955975008", "1.980031390369082"],
        ],
        "K_diag": ["0.2523093948412364", "0.4504313304404388", "0.0", "0.2972592747183247"],
        "AN": [
            ["2.602941176470588", "0.09421300555614037", "-1.072906715212599", "0.6"],
            ["-9.770538838886514", "3.643517491998914", "4.765969638829557", "-3.172336041397070"],
            ["9.121758438719117", "-5.324324324324324", "-3.193548387096774", "3.514071174094508"],
            ["-2.137018032260198", "3.217404548657921", "-2.956254337680976", "1.067051202531710"],
        ],
        "KN": [
            ["0.2752122060365109", "0", "0.03076923076923077", "0.06493506493506494"],
            ["-0.07088680624623493", "0.3735422712438619", "-0.1699040256986543", "-0.3585636905978095"],
            ["0.07575757575757576", "0", "0.2750926288014159", "0.3832012950339724"],
            ["-0.01770820812361161", "0", "-0.04244366487128950", "0.1921737961617600"],
        ],
    },
}

TRIPLET_NAMES = tuple(_RAW)


@dataclass(frozen=True)
class PeerTriplet:
    """One triplet: stored coefficients plus everything derivable from them."""

    name: str
    s: int
    order_pair: tuple[int, int]
    c_rational: tuple[Fraction, ...]
    c: np.ndarray = field(repr=False)
    A0: np.ndarray = field(repr=False)
    K0: np.ndarray = field(repr=False)
    R0: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    AN: np.ndarray = field(repr=False)
    KN: np.ndarray = field(repr=False)
    RN: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    BN: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    blind_stage_indices: frozenset[int]
    fsal: bool

    @property
    def max_node(self) -> float:
        return float(self.c.max())

    def step_matrices(self, n: int, n_last: int):
        """(A_n, B_n, K_n) for step n on a grid whose last step index is n_last."""
        if n == 0:
            return self.A0, None, self.K0
        if n == n_last:
            return self.AN, self.BN, self.KN
        return self.A, self.B, self.K

    def column_sums(self, which: str) -> np.ndarray:
        """Column sums 1^T K_n, the control weights k_{ni}."""
        k = {"start": self.K0, "standard": self.K, "end": self.KN}[which]
        return k.sum(axis=0)

    def to_jsonable(self) -> dict:
        raw = _RAW[self.name]
        out = {
            "name": self.name,
            "s": self.s,
            "order_pair": list(self.order_pair),
            "c_rational": [[f.numerator, f.denominator] for f in self.c_rational],
            "fsal": self.fsal,
            "blind_stage_indices": sorted(self.blind_stage_indices),
        }
        for key, val in raw.items():
            if key in ("order_pair", "fsal", "c"):
                continue
            out[key] = val
        for key in ("B", "BN", "a", "w", "v"):
            out[key] = getattr(self, key).tolist()
        return out


def _assemble_raw(name: str) -> dict:
    try:
        raw = _RAW[name]
    except KeyError:
        raise CatalogError(f"unknown triplet {name!r}; known: {', '.join(TRIPLET_NAMES)}") from None
    s = 4
    c_rat = tuple(raw["c"])
    c = np.array([float(f) for f in c_rat])
    A0 = _mat(raw["A0"])
    K0 = np.diag([float(x) for x in raw["K0_diag"]]) if "K0_diag" in raw else _mat(raw["K0"])
    A = _mat(raw["A"])
    K = np.diag([float(x) for x in raw["K_diag"]])
    AN = _mat(raw["AN"])
    KN = _mat(raw["KN"])
    R = np.zeros((s, s))
    RN = np.zeros((s, s))
    if "R_col4" in raw:
        R[:, 3] = [float(x) for x in raw["R_col4"]]
    if "RN_col4" in raw:
        RN[:, 3] = [float(x) for x in raw["RN_col4"]]
    return {
        "name": name,
        "s": s,
        "order_pair": tuple(raw["order_pair"]),
        "c_rational": c_rat,
        "c": c,
        "A0": A0,
        "K0": K0,
        "R0": np.zeros((s, s)),  # never used: there is no B for the start step
        "A": A,
        "K": K,
        "R": R,
        "AN": AN,
        "KN": KN,
        "RN": RN,
        "fsal": bool(raw["fsal"]),
    }


def derive_b_matrices(raw: dict) -> PeerTriplet:
    """Reconstruct B, B_N, a, w, v from the stored (A_n, K_n, R_n, c)."""
    s = raw["s"]
    c = raw["c"]
    V4 = vandermonde(c, s)
    if abs(np.linalg.det(V4)) < 1e-12:
        raise ValueError("confluent nodes: Vandermonde matrix is singular")
    P4 = pascal(s)
    E4 = nilpotent_shift(s)
    V4inv = np.linalg.inv(V4)

    def derive_b(a_n, k_n, r_n):
        return (a_n @ V4 - k_n @ V4 @ E4 + r_n) @ P4 @ V4inv

    ones = np.ones(s)
    B = derive_b(raw["A"], raw["K"], raw["R"])
    BN = derive_b(raw["AN"], raw["KN"], raw["RN"])
    a = raw["A0"] @ ones
    w = raw["AN"].T @ ones
    # interpolation weights for evaluating the stage polynomial at offset 0
    v = np.linalg.solve(V4.T, np.eye(s)[:, 0])
    blind = frozenset(j for j in range(s) if not raw["K"][:, j].any())
    return PeerTriplet(
        name=raw["name"],
        s=s,
        order_pair=raw["order_pair"],
        c_rational=raw["c_rational"],
        c=c,
        A0=raw["A0"],
        K0=raw["K0"],
        R0=raw["R0"],
        A=raw["A"],
        K=raw["K"],
        R=raw["R"],
        AN=raw["AN"],
        KN=raw["KN"],
        RN=raw["RN"],
        B=B,
        BN=BN,
        a=a,
        w=w,
        v=v,
        blind_stage_indices=blind,
        fsal=raw["fsal"],
    )


def load_triplet(name: str) -> PeerTriplet:
    """Load one of the published triplets by name."""
    return derive_b_matrices(_assemble_raw(name))
