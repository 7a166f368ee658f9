"""Molecule-level integral bundles and the impurity Hamiltonian exchange format.

The bundle is a line-oriented text file (version tag ``EMBER-BUNDLE v1``)
holding the AO overlap, core Hamiltonian and two-electron integrals of one
molecule together with its geometry and electron count.  Two-electron
integrals are chemist-notation ``(pq|rs)`` values stored once per
symmetry-unique quadruple; lookups resolve any of the 8 equivalent index
orders to the stored value, so the permutational symmetry is exact by
construction.

Impurity Hamiltonians use the conventional FCIDUMP text format for interop
(one-body lines carry ``r = s = 0``, the scalar core line all-zero indices).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BundleFormatError, ValidationError

FORMAT_TAG = "EMBER-BUNDLE v1"
ERI_STORE_CUTOFF = 1e-14
ERI_SYMMETRY_TOL = 1e-12


def canonical_eri_key(p: int, q: int, r: int, s: int) -> tuple[int, int, int, int]:
    """Map an index quadruple to its canonical representative.

    Canonical order: ``p >= q``, ``r >= s`` and pair ``(p, q) >= (r, s)``
    lexicographically, which selects one member of each 8-fold orbit.
    """
    if p < q:
        p, q = q, p
    if r < s:
        r, s = s, r
    if (p, q) < (r, s):
        p, q, r, s = r, s, p, q
    return p, q, r, s


def _fmt(x: float) -> str:
    return "%.17g" % x


def _payload_checksum(lines) -> float:
    """Sum every numeric token on the given lines (exact fsum accumulation)."""
    tokens = []
    for line in lines:
        for tok in line.split():
            try:
                tokens.append(float(tok))
            except ValueError:
                continue
    return math.fsum(tokens)


@dataclass
class IntegralBundle:
    """AO-basis integrals, geometry and electron count for one molecule.

    ``eri`` holds only symmetry-unique chemist-notation values with
    ``|value| > 1e-14``, keyed canonically.
    """

    n_ao: int
    n_elec: int
    e_nuc: float
    overlap: np.ndarray
    hcore: np.ndarray
    eri: dict
    atom_map: list
    atoms: list
    basis_label: str = "sto-3g"
    label: str = ""
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def get_eri(self, p: int, q: int, r: int, s: int) -> float:
        n = self.n_ao
        for i in (p, q, r, s):
            if not 0 <= i < n:
                raise IndexError(f"orbital index {i} out of range [0, {n})")
        return self.eri.get(canonical_eri_key(p, q, r, s), 0.0)

    def eri_dense(self) -> np.ndarray:
        """Full (n,n,n,n) chemist-notation array; built lazily, then cached."""
        if self._dense is None:
            n = self.n_ao
            g = np.zeros((n, n, n, n))
            for (p, q, r, s), v in self.eri.items():
                g[p, q, r, s] = v
                g[q, p, r, s] = v
                g[p, q, s, r] = v
                g[q, p, s, r] = v
                g[r, s, p, q] = v
                g[s, r, p, q] = v
                g[r, s, q, p] = v
                g[s, r, q, p] = v
            self._dense = g
        return self._dense

    def validate(self) -> None:
        n = self.n_ao
        if self.overlap.shape != (n, n) or self.hcore.shape != (n, n):
            raise ValidationError("matrix dimensions do not match NAO")
        if len(self.atom_map) != n:
            raise ValidationError("atom_map must assign every AO exactly once")
        if any(not 0 <= a < len(self.atoms) for a in self.atom_map):
            raise ValidationError("atom_map refers to a missing atom")
        if self.n_elec % 2 != 0:
            raise ValidationError("odd electron count (closed-shell scope)")
        if not np.allclose(self.hcore, self.hcore.T, atol=1e-12):
            raise ValidationError("hcore is not symmetric")
        if not np.allclose(self.overlap, self.overlap.T, atol=1e-12):
            raise ValidationError("overlap is not symmetric")
        smallest = float(np.linalg.eigvalsh(self.overlap)[0])
        if smallest <= 0.0:
            raise ValidationError(
                f"overlap is not positive definite (smallest eigenvalue {smallest:g})",
                smallest_eigenvalue=smallest,
            )


def get_eri(obj, p: int, q: int, r: int, s: int) -> float:
    """Symmetric ERI lookup on either a bundle or an impurity Hamiltonian."""
    return obj.get_eri(p, q, r, s)


def write_bundle(bundle: IntegralBundle, path) -> None:
    bundle.validate()
    lines = []
    lines.append(f"NAO {bundle.n_ao}")
    lines.append(f"NELEC {bundle.n_elec}")
    lines.append(f"ENUC {_fmt(bundle.e_nuc)}")
    lines.append(f"BASIS {bundle.basis_label}")
    if bundle.label:
        lines.append(f"LABEL {bundle.label}")
    lines.append(f"NATOM {len(bundle.atoms)}")
    for i, (sym, x, y, z) in enumerate(bundle.atoms):
        lines.append(f"ATOM {i} {sym} {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    for i, a in enumerate(bundle.atom_map):
        lines.append(f"AOMAP {i} {a}")
    lines.append("OVERLAP")
    for i in range(bundle.n_ao):
        for j in range(i, bundle.n_ao):
            lines.append(f"{i} {j} {_fmt(bundle.overlap[i, j])}")
    lines.append("HCORE")
    for i in range(bundle.n_ao):
        for j in range(i, bundle.n_ao):
            lines.append(f"{i} {j} {_fmt(bundle.hcore[i, j])}")
    lines.append("ERI")
    for (p, q, r, s) in sorted(bundle.eri):
        v = bundle.eri[(p, q, r, s)]
        if abs(v) > ERI_STORE_CUTOFF:
            lines.append(f"{p} {q} {r} {s} {_fmt(v)}")
    checksum = _payload_checksum(lines)
    with open(path, "w") as fh:
        fh.write(FORMAT_TAG + "\n")
        fh.write("\n".join(lines))
        fh.write(f"\nCHECKSUM {_fmt(checksum)}\n")


def read_bundle(path) -> IntegralBundle:
    with open(path) as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    raw = [ln for ln in raw if ln.strip()]
    if not raw or raw[0].strip() != FORMAT_TAG:
        got = raw[0].strip() if raw else "<empty file>"
        raise BundleFormatError(f"unknown version tag: {got!r}")

    body = raw[1:]
    checksum_stated = None
    payload = []
    for ln in body:
        if ln.startswith("CHECKSUM"):
            checksum_stated = float(ln.split()[1])
            break
        payload.append(ln)
    if checksum_stated is None:
        raise BundleFormatError("missing CHECKSUM line")
    recomputed = _payload_checksum(payload)
    if recomputed != checksum_stated:
        raise BundleFormatError(
            "checksum mismatch: numeric payload corrupted",
            stated=checksum_stated,
            recomputed=recomputed,
        )

    header = {}
    atoms = []
    atom_map = {}
    it = iter(payload)
    section = None
    overlap_entries = []
    hcore_entries = []
    eri_entries = {}
    label = ""
    basis = ""
    try:
        for ln in it:
            parts = ln.split()
            key = parts[0]
            if key in ("NAO", "NELEC", "NATOM"):
                header[key] = int(parts[1])
            elif key == "ENUC":
                header[key] = float(parts[1])
            elif key == "BASIS":
                basis = parts[1] if len(parts) > 1 else ""
            elif key == "LABEL":
                label = parts[1] if len(parts) > 1 else ""
            elif key == "ATOM":
                atoms.append((parts[2], float(parts[3]), float(parts[4]), float(parts[5])))
            elif key == "AOMAP":
                atom_map[int(parts[1])] = int(parts[2])
            elif key in ("OVERLAP", "HCORE", "ERI"):
                section = key
            elif section == "OVERLAP":
                overlap_entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
            elif section == "HCORE":
                hcore_entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
            elif section == "ERI":
                p, q, r, s = (int(t) for t in parts[:4])
                v = float(parts[4])
                ckey = canonical_eri_key(p, q, r, s)
                if ckey in eri_entries and abs(eri_entries[ckey] - v) > ERI_SYMMETRY_TOL:
                    raise BundleFormatError(
                        f"eri permutational-symmetry violation at {ckey}: "
                        f"{eri_entries[ckey]!r} vs {v!r}"
                    )
                eri_entries.setdefault(ckey, v)
            else:
                raise BundleFormatError(f"unparseable line: {ln!r}")
    except (IndexError, ValueError) as exc:
        raise BundleFormatError(f"malformed line: {ln!r} ({exc})") from exc

    for need in ("NAO", "NELEC", "ENUC", "NATOM"):
        if need not in header:
            raise BundleFormatError(f"malformed header: missing {need}")
    n = header["NAO"]
    if len(atoms) != header["NATOM"]:
        raise BundleFormatError("dimension mismatch: NATOM vs ATOM lines")
    if sorted(atom_map) != list(range(n)):
        raise BundleFormatError("dimension mismatch: AOMAP must cover every AO once")

    overlap = np.zeros((n, n))
    hcore = np.zeros((n, n))
    for i, j, v in overlap_entries:
        if not (0 <= i < n and 0 <= j < n):
            raise BundleFormatError(f"dimension mismatch: overlap index ({i},{j})")
        overlap[i, j] = overlap[j, i] = v
    for i, j, v in hcore_entries:
        if not (0 <= i < n and 0 <= j < n):
            raise BundleFormatError(f"dimension mismatch: hcore index ({i},{j})")
        hcore[i, j] = hcore[j, i] = v
    for (p, q, r, s) in eri_entries:
        if not all(0 <= x < n for x in (p, q, r, s)):
            raise BundleFormatError(f"dimension mismatch: eri index {(p, q, r, s)}")

    bundle = IntegralBundle(
        n_ao=n,
        n_elec=header["NELEC"],
        e_nuc=header["ENUC"],
        overlap=overlap,
        hcore=hcore,
        eri=eri_entries,
        atom_map=[atom_map[i] for i in range(n)],
        atoms=atoms,
        basis_label=basis,
        label=label,
    )
    try:
        bundle.validate()
    except ValidationError as exc:
        raise BundleFormatError(str(exc), **exc.detail) from exc
    return bundle


@dataclass
class ImpurityHamiltonian:
    """Effective Hamiltonian on a fragment+bath orbital space.

    ``h1`` already carries the chemical-potential shift on the fragment
    diagonal (recorded in ``mu_glob``); ``e_const`` is the core-block
    mean-field energy kept for bookkeeping only.
    """

    n_orb: int
    n_elec_imp: int
    h1: np.ndarray
    eri_imp: np.ndarray
    e_const: float = 0.0
    frag_indices: tuple = ()
    mu_glob: float = 0.0

    def __post_init__(self):
        self.h1 = np.asarray(self.h1, dtype=float)
        self.eri_imp = np.asarray(self.eri_imp, dtype=float)
        n = self.n_orb
        if self.h1.shape != (n, n) or self.eri_imp.shape != (n, n, n, n):
            raise ValidationError("impurity matrix dimensions do not match n_orb")
        if not np.allclose(self.h1, self.h1.T, atol=1e-10):
            raise ValidationError("impurity h1 is not symmetric")
        if any(not 0 <= p < n for p in self.frag_indices):
            raise ValidationError("frag_indices out of range")

    def get_eri(self, p, q, r, s):
        n = self.n_orb
        for i in (p, q, r, s):
            if not 0 <= i < n:
                raise IndexError(f"orbital index {i} out of range [0, {n})")
        return float(self.eri_imp[p, q, r, s])

    def h1_unshifted(self) -> np.ndarray:
        """One-body matrix with the fragment-diagonal mu shift removed."""
        h = self.h1.copy()
        for p in self.frag_indices:
            h[p, p] += self.mu_glob
        return h


def write_impurity_fcidump(imp: ImpurityHamiltonian, path) -> None:
    n = imp.n_orb
    with open(path, "w") as fh:
        fh.write(f"&FCI NORB={n},NELEC={imp.n_elec_imp},MS2=0,\n")
        fh.write("  ORBSYM=" + ",".join(["1"] * n) + ",\n")
        fh.write("  ISYM=1,\n")
        fh.write("&END\n")
        for p in range(n):
            for q in range(p + 1):
                for r in range(p + 1):
                    smax = q if r == p else r
                    for s in range(smax + 1):
                        v = imp.eri_imp[p, q, r, s]
                        if abs(v) > ERI_STORE_CUTOFF:
                            fh.write(f"{_fmt(v)} {p + 1} {q + 1} {r + 1} {s + 1}\n")
        for p in range(n):
            for q in range(p + 1):
                v = imp.h1[p, q]
                if abs(v) > ERI_STORE_CUTOFF:
                    fh.write(f"{_fmt(v)} {p + 1} {q + 1} 0 0\n")
        fh.write(f"{_fmt(imp.e_const)} 0 0 0 0\n")


def read_impurity_fcidump(path) -> ImpurityHamiltonian:
    """Parse an FCIDUMP file.  Fragment indices are not part of the format."""
    with open(path) as fh:
        text = fh.read()
    head, _, rest = text.partition("&END")
    if not rest:
        raise BundleFormatError("FCIDUMP: missing &END header terminator")
    header = head.replace(",", " ").replace("=", " = ").split()
    norb = nelec = None
    for i, tok in enumerate(header):
        if tok.upper() == "NORB" and header[i + 1] == "=":
            norb = int(header[i + 2])
        if tok.upper() == "NELEC" and header[i + 1] == "=":
            nelec = int(header[i + 2])
    if norb is None or nelec is None:
        raise BundleFormatError("FCIDUMP: header must define NORB and NELEC")

    h1 = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    e_const = 0.0
    for ln in rest.splitlines():
        parts = ln.split()
        if not parts:
            continue
        v = float(parts[0])
        p, q, r, s = (int(t) for t in parts[1:5])
        if p == q == r == s == 0:
            e_const = v
        elif r == s == 0:
            h1[p - 1, q - 1] = h1[q - 1, p - 1] = v
        else:
            for a, b, c, d in _eri_orbit(p - 1, q - 1, r - 1, s - 1):
                eri[a, b, c, d] = v
    return ImpurityHamiltonian(
        n_orb=norb, n_elec_imp=nelec, h1=h1, eri_imp=eri, e_const=e_const
    )


def _eri_orbit(p, q, r, s):
    return {
        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
    }


def eri_dict_from_dense(g: np.ndarray, cutoff: float = ERI_STORE_CUTOFF) -> dict:
    """Collapse a dense chemist-notation array to the canonical sparse store."""
    n = g.shape[0]
    out = {}
    for p in range(n):
        for q in range(p + 1):
            for r in range(p + 1):
                smax = q if r == p else r
                for s in range(smax + 1):
                    v = float(g[p, q, r, s])
                    if abs(v) > cutoff:
                        out[(p, q, r, s)] = v
    return out
