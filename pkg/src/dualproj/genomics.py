"""Genotype encoding, hybrid synthesis, trait prediction, and synthetic data.

Genotypes are diploid calls over {A, C, G, T}; a call like "AG" is
heterozygous, "AA" homozygous. Against a homozygous reference line, each
locus encodes to an integer: heterozygous is 1, homozygous matching the
reference is 0, homozygous differing is 2.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.decomposition import PCA
from sklearn.neural_network import MLPRegressor
from sklearn.preprocessing import StandardScaler

ALLELES = frozenset("ACGT")
GENOTYPE_VALUES = (0, 1, 2)


@dataclass(frozen=True)
class GeneLocus:
    chromosome: int
    position: int

    @property
    def label(self):
        return f"{self.chromosome}:{self.position}"


def parse_gene_label(label):
    """Inverse of GeneLocus.label, e.g. "3:4150" -> GeneLocus(3, 4150)."""
    chrom, _, pos = str(label).partition(":")
    try:
        return GeneLocus(int(chrom), int(pos))
    except ValueError:
        raise ValueError(f"malformed gene label {label!r}; expected 'chromosome:position'")


def _check_gene_order(genes):
    last = {}
    for g in genes:
        if g.chromosome in last and g.position <= last[g.chromosome]:
            raise ValueError(
                f"gene positions must be strictly increasing within a chromosome; "
                f"{g.label} follows {g.chromosome}:{last[g.chromosome]}"
            )
        last[g.chromosome] = g.position


@dataclass
class GenotypeMatrix:
    """Encoded hybrids-by-genes matrix with row/column identity."""

    hybrids: list
    genes: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        n, d = self.values.shape
        if len(self.hybrids) != n or len(self.genes) != d:
            raise ValueError("hybrid/gene id counts do not match the value matrix")
        bad = ~np.isin(self.values, GENOTYPE_VALUES)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(
                f"genotype value {self.values[i, j]!r} at hybrid {self.hybrids[i]}, "
                f"gene {self.genes[j].label} is not in {{0, 1, 2}}"
            )
        self.values = self.values.astype(np.int64)
        _check_gene_order(self.genes)

    @property
    def gene_labels(self):
        return [g.label for g in self.genes]

    def gene_index(self, gene):
        """Column index from an int, a GeneLocus, or a "chr:pos" label."""
        if isinstance(gene, (int, np.integer)):
            if not 0 <= gene < len(self.genes):
                raise ValueError(f"gene index {gene} out of range")
            return int(gene)
        label = gene.label if isinstance(gene, GeneLocus) else str(gene)
        try:
            return self.gene_labels.index(label)
        except ValueError:
            raise ValueError(f"unknown gene {label!r}")


@dataclass
class ParentLine:
    """A homozygous breeding line: one diploid call per gene."""

    id: str
    calls: tuple

    def __post_init__(self):
        self.calls = tuple(str(c) for c in self.calls)

    def allele_at(self, j):
        a, _ = _parse_call(self.calls[j], self.id, j)
        return a


@dataclass
class TraitTable:
    """Named real-valued traits keyed by hybrid."""

    hybrids: list
    names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("trait values must be 2-D")
        if len(self.hybrids) != self.values.shape[0]:
            raise ValueError("hybrid count does not match trait rows")
        if len(self.names) != self.values.shape[1]:
            raise ValueError("trait name count does not match columns")
        if len(set(self.names)) != len(self.names):
            raise ValueError("trait names must be unique")
        bad = ~np.isfinite(self.values)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(
                f"trait {self.names[j]!r} has non-finite value for hybrid {self.hybrids[i]}"
            )

    def column(self, name):
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise ValueError(f"unknown trait {name!r}")


def _parse_call(call, owner, locus):
    call = str(call)
    if len(call) != 2 or call[0] not in ALLELES or call[1] not in ALLELES:
        raise ValueError(f"unknown call {call!r} for {owner} at locus {locus}")
    return call[0], call[1]


def _reference_alleles(reference, n_genes):
    if len(reference.calls) != n_genes:
        raise ValueError(
            f"reference line {reference.id} covers {len(reference.calls)} loci, expected {n_genes}"
        )
    alleles = []
    for j, call in enumerate(reference.calls):
        a, b = _parse_call(call, f"reference {reference.id}", j)
        if a != b:
            raise ValueError(f"reference {reference.id} is heterozygous at locus {j}")
        alleles.append(a)
    return alleles


def encode_genotypes(calls, reference, genes, hybrids=None):
    """Encode raw diploid calls against a reference line.

    ``calls`` is an (n_hybrids, n_genes) array of two-letter strings. Each
    cell becomes 1 if heterozygous, 0 if homozygous equal to the reference
    allele, 2 if homozygous different.
    """
    calls = np.asarray(calls, dtype=object)
    if calls.ndim != 2:
        raise ValueError("calls must be 2-D")
    n, d = calls.shape
    if len(genes) != d:
        raise ValueError(f"{len(genes)} gene ids for {d} call columns")
    ref = _reference_alleles(reference, d)
    if hybrids is None:
        hybrids = [f"H{i:04d}" for i in range(n)]
    values = np.empty((n, d), dtype=np.int64)
    for i in range(n):
        for j in range(d):
            a, b = _parse_call(calls[i, j], f"hybrid {hybrids[i]}", genes[j].label)
            if a != b:
                values[i, j] = 1
            elif a == ref[j]:
                values[i, j] = 0
            else:
                values[i, j] = 2
    return GenotypeMatrix(hybrids=list(hybrids), genes=list(genes), values=values)


def synthesize_hybrid(p, m, reference):
    """Encoded F1 genotype of a cross between two homozygous lines.

    Per locus: ref x ref -> 0, alt x alt -> 2, anything mixed -> 1.
    """
    if len(p.calls) != len(m.calls):
        raise ValueError(f"parent lines {p.id} and {m.id} cover different gene sets")
    ref = _reference_alleles(reference, len(p.calls))
    out = np.empty(len(ref), dtype=np.int64)
    for j in range(len(ref)):
        pa, pb = _parse_call(p.calls[j], f"line {p.id}", j)
        ma, mb = _parse_call(m.calls[j], f"line {m.id}", j)
        if pa != pb or ma != mb:
            bad = p.id if pa != pb else m.id
            raise ValueError(f"line {bad} is not homozygous at locus {j}")
        if pa == ma:
            out[j] = 0 if pa == ref[j] else 2
        else:
            out[j] = 1
    return out


def homozygous_alleles(line):
    """Single allele per locus of a homozygous line, as a length-1 str array."""
    alleles = []
    for j, call in enumerate(line.calls):
        a, b = _parse_call(call, f"line {line.id}", j)
        if a != b:
            raise ValueError(f"line {line.id} is not homozygous at locus {j}")
        alleles.append(a)
    return np.array(alleles, dtype="<U1")


def genomic_distance(a, b):
    """Number of mismatched loci between two encoded genotype vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"genotype length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


# ---- trait prediction --------------------------------------------------------------


class TraitPredictor:
    """PCA-compressed genotypes feeding a small two-hidden-layer regressor."""

    def __init__(self, pca, scaler, regressor, trait_names, y_mean, y_scale):
        self._pca = pca
        self._scaler = scaler
        self._regressor = regressor
        self.trait_names = list(trait_names)
        self._y_mean = y_mean
        self._y_scale = y_scale

    def predict(self, genotypes):
        """Trait vector for one genotype, or a matrix for a stack of them."""
        g = np.asarray(genotypes, dtype=np.float64)
        single = g.ndim == 1
        z = self._scaler.transform(self._pca.transform(np.atleast_2d(g)))
        y = np.atleast_2d(self._regressor.predict(z))
        if y.shape[0] == 1 and y.shape[1] != len(self.trait_names):
            y = y.reshape(-1, len(self.trait_names))
        y = y * self._y_scale + self._y_mean
        return y[0] if single else y

    def standardize(self, traits):
        """Express trait values in training-set z-score units."""
        return (np.asarray(traits, dtype=np.float64) - self._y_mean) / self._y_scale


def train_trait_predictor(X, traits, pca_dims=200, seed=0):
    """Fit the trait predictor on encoded genotypes.

    Requires at least 50 hybrids. A constant trait column triggers a warning
    but still trains (the model just learns its mean).
    """
    if X.values.shape[0] < 50:
        raise ValueError(f"need at least 50 training hybrids, got {X.values.shape[0]}")
    if list(X.hybrids) != list(traits.hybrids):
        raise ValueError("trait table hybrids do not match the genotype matrix")
    for j, name in enumerate(traits.names):
        if np.ptp(traits.values[:, j]) == 0.0:
            warnings.warn(f"trait {name!r} is constant; predictor will learn its mean")

    n, d = X.values.shape
    dims = min(pca_dims, d, n - 1)
    pca = PCA(n_components=dims, random_state=seed)
    z = pca.fit_transform(X.values.astype(np.float64))
    scaler = StandardScaler()
    z = scaler.fit_transform(z)

    y_mean = traits.values.mean(axis=0)
    y_scale = traits.values.std(axis=0)
    y_scale = np.where(y_scale > 0.0, y_scale, 1.0)
    y = (traits.values - y_mean) / y_scale

    reg = MLPRegressor(
        hidden_layer_sizes=(64, 32),
        max_iter=3000,
        tol=1e-6,
        random_state=seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        reg.fit(z, y if y.shape[1] > 1 else y.ravel())
    return TraitPredictor(pca, scaler, reg, traits.names, y_mean, y_scale)


# ---- synthetic data ----------------------------------------------------------------

TRAIT_NAMES = ("yield", "length_width_ratio")
TRAIT_BASES = (500.0, 3.0)


@dataclass
class GenomicDataset:
    """A generated or loaded dataset bundle.

    ``parents`` excludes the reference line; ``planted_genes`` is None for
    real data and a list of column indices for synthetic data.
    """

    genotypes: GenotypeMatrix
    traits: TraitTable
    parents: list
    reference: ParentLine
    planted_genes: list = None
    name: str = "dataset"


def _carve_blocks(n_genes, n_regulatory, rng):
    """Block sizes plus how many leading blocks are regulatory.

    The regulatory region is carved first so planted genes always cover
    whole linkage blocks; correlated neighbors of planted genes are then
    themselves planted, never innocent bystanders.
    """
    sizes = []
    left = n_regulatory
    while left > 0:
        # Absorb small remainders so no block degenerates to one or two genes.
        take = left if left <= 8 else int(rng.integers(3, 7))
        sizes.append(take)
        left -= take
    n_planted_blocks = len(sizes)
    left = n_genes - n_regulatory
    while left > 0:
        take = left if left <= 10 else int(rng.integers(4, 9))
        sizes.append(take)
        left -= take
    return sizes, n_planted_blocks


def generate_synthetic_dataset(
    n_hybrids,
    n_genes,
    n_regulatory,
    effect_size=1.0,
    seed=0,
    noise=0.5,
    n_parents=None,
):
    """Parents with blockwise-correlated genotypes, random crosses, and traits
    driven by a planted set of regulatory genes (linear plus a few pairwise
    interactions, plus Gaussian noise).

    ``n_parents`` defaults to a pool wide enough that almost every cross is
    unique; passing a small value (a breeding panel crosses a few dozen elite
    lines) yields half-sib families large enough to show up as clusters.
    """
    if n_regulatory > n_genes:
        raise ValueError("n_regulatory cannot exceed n_genes")
    rng = np.random.default_rng(seed)

    sizes, n_planted_blocks = _carve_blocks(n_genes, n_regulatory, rng)
    order = rng.permutation(len(sizes))
    planted_mask = np.zeros(n_genes, dtype=bool)
    blocks = []
    start = 0
    for b in order:
        blocks.append((start, start + sizes[b]))
        if b < n_planted_blocks:
            planted_mask[start : start + sizes[b]] = True
        start += sizes[b]

    # Blocks are assigned to chromosomes 1..12 contiguously, never straddling.
    per_chrom = -(-len(blocks) // 12)
    genes = []
    gene_block = np.empty(n_genes, dtype=np.int64)
    for bi, (lo, hi) in enumerate(blocks):
        chrom = bi // per_chrom + 1
        if not genes or genes[-1].chromosome != chrom:
            pos = 0
        gene_block[lo:hi] = bi
        for _ in range(lo, hi):
            pos += int(rng.integers(500, 5000))
            genes.append(GeneLocus(chrom, pos))

    ref_alleles = rng.choice(list("ACGT"), size=n_genes)
    alt_alleles = np.array(
        [rng.choice([a for a in "ACGT" if a != r]) for r in ref_alleles]
    )

    # A bigger parent pool dilutes chance correlations between unlinked blocks.
    if n_parents is None:
        n_parents = max(12, int(np.ceil(6.0 * np.sqrt(n_hybrids))))
    elif n_parents < 2:
        raise ValueError("n_parents must be at least 2")
    alt = np.zeros((n_parents, n_genes), dtype=bool)
    for lo, hi in blocks:
        freq = rng.uniform(0.2, 0.8)
        state = rng.random(n_parents) < freq
        flips = rng.random((n_parents, hi - lo)) < 0.05
        alt[:, lo:hi] = state[:, None] ^ flips

    parent_calls = np.where(alt, alt_alleles, ref_alleles)
    parents = [
        ParentLine(id=f"P{i:03d}", calls=tuple(c + c for c in parent_calls[i]))
        for i in range(n_parents)
    ]
    reference = ParentLine(id="REF", calls=tuple(a + a for a in ref_alleles))

    p_idx = rng.integers(0, n_parents, size=n_hybrids)
    m_idx = rng.integers(0, n_parents - 1, size=n_hybrids)
    m_idx = np.where(m_idx >= p_idx, m_idx + 1, m_idx)
    values = alt[p_idx].astype(np.int64) + alt[m_idx].astype(np.int64)
    hybrids = [f"H{i:04d}" for i in range(n_hybrids)]
    genotypes = GenotypeMatrix(hybrids=hybrids, genes=genes, values=values)

    planted = np.flatnonzero(planted_mask)
    g = values[:, planted].astype(np.float64)
    n_traits = len(TRAIT_NAMES)
    # Counted alleles are oriented trait-increasing (the usual effect-allele
    # convention), and each block's total effect is normalized to the same
    # budget: linked genes add coherently, so an unnormalized large block
    # would drown the small ones in trait variance.
    _, block_of = np.unique(gene_block[planted], return_inverse=True)
    n_blocks = block_of.max() + 1 if len(planted) else 0
    share = rng.uniform(0.5, 1.5, size=(len(planted), n_traits))
    for b in range(n_blocks):
        mask = block_of == b
        share[mask] /= share[mask].sum(axis=0, keepdims=True)
    beta = 4.0 * effect_size * share
    trait_vals = np.tile(TRAIT_BASES, (n_hybrids, 1)) + g @ beta
    # Interactions stay a modest fraction of the linear signal; otherwise an
    # unlucky draw can cancel a whole block's linear contribution.
    n_pairs = min(3, len(planted) // 2)
    if n_pairs > 0:
        pair_ids = rng.choice(len(planted), size=(n_pairs, 2), replace=False)
        gamma = 0.25 * effect_size * rng.normal(size=(n_pairs, n_traits))
        for (a, b), coef in zip(pair_ids, gamma):
            trait_vals += np.outer(g[:, a] * g[:, b], coef)
    trait_vals += noise * rng.normal(size=(n_hybrids, n_traits))
    traits = TraitTable(hybrids=list(hybrids), names=list(TRAIT_NAMES), values=trait_vals)

    return GenomicDataset(
        genotypes=genotypes,
        traits=traits,
        parents=parents,
        reference=reference,
        planted_genes=[int(j) for j in planted],
        name=f"synthetic-{seed}",
    )


# ---- boxplots ----------------------------------------------------------------------


def genotype_boxplot_data(X, traits, gene, trait_name):
    """Tukey boxplot statistics of a trait, grouped by genotype {0, 1, 2}.

    Empty groups come back as {"count": 0}; whiskers are the most extreme
    values within 1.5 IQR of the quartiles, everything beyond is an outlier.
    """
    j = X.gene_index(gene)
    t = traits.column(trait_name)
    if len(t) != X.values.shape[0]:
        raise ValueError("trait table and genotype matrix disagree on hybrid count")
    out = {}
    for geno in GENOTYPE_VALUES:
        vals = t[X.values[:, j] == geno]
        if vals.size == 0:
            out[geno] = {"count": 0}
            continue
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        inside = vals[(vals >= q1 - 1.5 * iqr) & (vals <= q3 + 1.5 * iqr)]
        out[geno] = {
            "count": int(vals.size),
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "whisker_low": float(inside.min()),
            "whisker_high": float(inside.max()),
            "outliers": sorted(float(v) for v in vals[(vals < q1 - 1.5 * iqr) | (vals > q3 + 1.5 * iqr)]),
        }
    return out


# ---- file round-trip ---------------------------------------------------------------


def save_dataset(dataset, directory):
    """Write manifest + CSVs; returns the manifest path.

    Layout: genotypes.csv (hybrid_id + one "chr:pos" column per gene),
    traits.csv (hybrid_id + one column per trait), parents.csv (line_id +
    per-gene diploid calls, reference line first).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    X, traits = dataset.genotypes, dataset.traits

    geno = pd.DataFrame(X.values, columns=X.gene_labels)
    geno.insert(0, "hybrid_id", X.hybrids)
    geno.to_csv(directory / "genotypes.csv", index=False)

    tr = pd.DataFrame(traits.values, columns=traits.names)
    tr.insert(0, "hybrid_id", traits.hybrids)
    tr.to_csv(directory / "traits.csv", index=False)

    lines = [dataset.reference] + list(dataset.parents)
    pr = pd.DataFrame([list(p.calls) for p in lines], columns=X.gene_labels)
    pr.insert(0, "line_id", [p.id for p in lines])
    pr.to_csv(directory / "parents.csv", index=False)

    manifest = {
        "name": dataset.name,
        "n_hybrids": len(X.hybrids),
        "n_genes": len(X.genes),
        "files": {
            "genotypes": "genotypes.csv",
            "traits": "traits.csv",
            "parents": "parents.csv",
        },
    }
    if dataset.planted_genes is not None:
        manifest["planted_genes"] = [int(j) for j in dataset.planted_genes]
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_dataset(manifest_path):
    """Load and validate a dataset bundle; errors name the first bad cell."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    files = manifest["files"]

    geno = pd.read_csv(base / files["genotypes"], dtype={"hybrid_id": str})
    hybrids = geno["hybrid_id"].tolist()
    genes = [parse_gene_label(c) for c in geno.columns[1:]]
    raw = geno.iloc[:, 1:].to_numpy()
    # GenotypeMatrix validates the alphabet and gene order, naming the cell.
    X = GenotypeMatrix(hybrids=hybrids, genes=genes, values=raw)

    # round_trip parsing keeps trait floats bit-identical across save/load.
    tr = pd.read_csv(base / files["traits"], dtype={"hybrid_id": str}, float_precision="round_trip")
    t_hybrids = tr["hybrid_id"].tolist()
    if t_hybrids != hybrids:
        first = next(
            (i for i, (a, b) in enumerate(zip(t_hybrids, hybrids)) if a != b),
            min(len(t_hybrids), len(hybrids)),
        )
        raise ValueError(f"traits row {first} does not match genotype hybrids")
    traits = TraitTable(
        hybrids=t_hybrids,
        names=list(tr.columns[1:]),
        values=tr.iloc[:, 1:].to_numpy(dtype=np.float64),
    )

    pr = pd.read_csv(base / files["parents"], dtype=str)
    if list(pr.columns[1:]) != X.gene_labels:
        raise ValueError("parents file gene columns do not match the genotype matrix")
    lines = [
        ParentLine(id=row[0], calls=tuple(row[1:]))
        for row in pr.itertuples(index=False)
    ]
    if not lines:
        raise ValueError("parents file has no lines")
    reference, parents = lines[0], lines[1:]
    _reference_alleles(reference, len(genes))

    expected = {"n_hybrids": len(hybrids), "n_genes": len(genes)}
    for key, got in expected.items():
        if manifest.get(key) != got:
            raise ValueError(f"manifest {key}={manifest.get(key)} but files contain {got}")

    return GenomicDataset(
        genotypes=X,
        traits=traits,
        parents=parents,
        reference=reference,
        planted_genes=manifest.get("planted_genes"),
        name=manifest.get("name", manifest_path.stem),
    )
