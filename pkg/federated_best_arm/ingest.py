"""rating tables: parsing, the hetrec (MovieLens) join, cleanup and empirical instances

Clients are countries and arms are genres after the hetrec join; every rating
of a movie contributes one row per genre of that movie.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import (
    Dict,
    List,
    Literal,
    NamedTuple,
    Optional,
    Sequence,
    TextIO,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd
from loguru import logger

from .common import FloatMatrix, Node
from .instance import InvalidInstanceError, ProblemInstance, validate

RATINGS_HEADER = ("client", "arm", "rating")
COLUMNS = list(RATINGS_HEADER)

HETREC_RATINGS = "user_ratedmovies.dat"
HETREC_COUNTRIES = "movie_countries.dat"
HETREC_GENRES = "movie_genres.dat"


class Issue(NamedTuple):
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class RatingsFormatError(ValueError):
    def __init__(self, issues: Sequence[Issue]):
        super().__init__("\n".join(map(str, issues)))
        self.issues = list(issues)


@dataclass
class RatingsTable:
    """(client, arm, rating) rows"""

    frame: pd.DataFrame
    issues: List[Issue] = field(default_factory=list)
    """positioned problems of rows that were skipped while parsing"""

    dropped: Dict[str, int] = field(default_factory=dict)
    """number of rows dropped during a join, by reason"""

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def clients(self) -> List[str]:
        return sorted(self.frame["client"].unique())

    @property
    def arms(self) -> List[str]:
        return sorted(self.frame["arm"].unique())

    @property
    def client_index(self) -> Dict[str, int]:
        """1-based index of each client label"""
        return {c: i for i, c in enumerate(self.clients, start=1)}

    @property
    def arm_index(self) -> Dict[str, int]:
        """1-based index of each arm label"""
        return {a: i for i, a in enumerate(self.arms, start=1)}


def _empty_frame() -> pd.DataFrame:
    return pd.DataFrame(
        {
            "client": pd.Series(dtype=str),
            "arm": pd.Series(dtype=str),
            "rating": pd.Series(dtype=np.float64),
        }
    )


def _read_text(source: Union[Path, str, TextIO]) -> str:
    if isinstance(source, (Path, str)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(path)

        return path.read_text(encoding="utf-8-sig")

    return source.read()


def parse_ratings_csv(
    source: Union[Path, str, TextIO], strict: bool = True
) -> RatingsTable:
    """parse a comma separated 'client,arm,rating' table

    Args:
        source: path or text stream
        strict: raise `RatingsFormatError` on any malformed row instead of
                skipping it and recording the issue
    """
    lines = _read_text(source).splitlines()
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != RATINGS_HEADER:
        raise RatingsFormatError(
            [Issue(1, f"missing header '{','.join(RATINGS_HEADER)}'")]
        )

    issues: List[Issue] = []
    rows: List[Tuple[int, str, str, str]] = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue

        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 3:
            issues.append(Issue(number, f"expected 3 fields, got {len(fields)}"))
        elif not fields[0] or not fields[1]:
            issues.append(Issue(number, "empty label"))
        else:
            rows.append((number, fields[0], fields[1], fields[2]))

    frame = pd.DataFrame(rows, columns=["line", "client", "arm", "rating"])
    ratings = pd.to_numeric(frame["rating"], errors="coerce").astype(np.float64)
    non_numeric = ratings.isna()
    finite = np.isfinite(ratings)
    for number, bad in zip(frame["line"][~finite], non_numeric[~finite]):
        reason = "non-numeric rating" if bad else "non-finite rating"
        issues.append(Issue(int(number), reason))

    issues.sort()
    if issues and strict:
        raise RatingsFormatError(issues)

    for issue in issues:
        logger.warning("skipping {}", issue)

    frame = frame.assign(rating=ratings)[finite][COLUMNS].reset_index(drop=True)
    if frame.empty:
        frame = _empty_frame()

    return RatingsTable(frame=frame, issues=issues)


class HetrecFiles(Node, frozen=True):
    """the three tab separated hetrec files joined on movieID"""

    ratings: Path
    """userID, movieID, rating (further columns are ignored)"""

    countries: Path
    """movieID, country"""

    genres: Path
    """movieID, genre"""

    @classmethod
    def from_folder(cls, folder: Union[Path, str]) -> HetrecFiles:
        folder = Path(folder)
        return cls(
            ratings=folder / HETREC_RATINGS,
            countries=folder / HETREC_COUNTRIES,
            genres=folder / HETREC_GENRES,
        )


def _read_tsv(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(path)

    # no NA detection: labels like "nan" are kept verbatim
    frame = pd.read_csv(
        path, sep="\t", dtype=str, keep_default_na=False, encoding="utf-8"
    )
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} lacks column(s) {', '.join(missing)}")

    return frame[list(columns)].apply(lambda c: c.str.strip())


def join_hetrec(files: HetrecFiles) -> RatingsTable:
    """one row per (rating, genre of the rated movie) with client=country, arm=genre"""
    ratings = _read_tsv(files.ratings, ["userID", "movieID", "rating"])
    countries = _read_tsv(files.countries, ["movieID", "country"])
    genres = _read_tsv(files.genres, ["movieID", "genre"])

    countries = countries[countries["country"] != ""]
    genres = genres[genres["genre"] != ""]

    resolvable = ratings["movieID"].isin(countries["movieID"])
    genre_less = resolvable & ~ratings["movieID"].isin(genres["movieID"])
    dropped = {
        "unresolved movie": int((~resolvable).sum()),
        "movie without genre": int(genre_less.sum()),
    }
    for reason, count in dropped.items():
        if count:
            logger.info("dropping {} rating(s): {}", count, reason)

    joined = ratings[resolvable].merge(countries, on="movieID")
    joined = joined.merge(genres, on="movieID")
    frame = pd.DataFrame(
        {
            "client": joined["country"],
            "arm": joined["genre"],
            "rating": pd.to_numeric(joined["rating"]).astype(np.float64),
        }
    ).reset_index(drop=True)
    logger.info(
        "joined {} ratings into {} (country, genre) rows", len(ratings), len(frame)
    )
    return RatingsTable(frame=frame, dropped=dropped)


def exact_cell_means(table: RatingsTable) -> Dict[Tuple[str, str], Fraction]:
    """mean rating of every (client, arm) cell as an exact rational

    Ratings on a 0.5 grid are summed exactly as integers; other ratings fall
    back to the (exact value of the) floating point mean.
    """
    frame = table.frame
    if frame.empty:
        return {}

    doubled = frame["rating"] * 2
    grouped = frame.assign(doubled=doubled).groupby(["client", "arm"])
    if bool((doubled == doubled.round()).all()):
        sums = grouped["doubled"].sum().round().astype("int64")
        counts = grouped["doubled"].count()
        return {
            key: Fraction(int(s), 2 * int(c))
            for key, s, c in zip(sums.index, sums, counts)
        }

    logger.warning("ratings are not on a 0.5 grid, comparing floating point means")
    means = grouped["rating"].mean()
    return {key: Fraction(float(mu)) for key, mu in zip(means.index, means)}


class RemovedClient(Node, frozen=True):
    label: str
    reason: Literal["missing arms", "tied local best"]
    arms: Sequence[str]
    """the missing resp. tied arms"""


def clean(table: RatingsTable) -> Tuple[RatingsTable, List[RemovedClient]]:
    """remove clients lacking ratings for some arm and clients with tied local best arms

    Repeats until no client is removed, so cleaning a cleaned table is a no-op.
    """
    removed: List[RemovedClient] = []
    frame = table.frame
    while True:
        current = RatingsTable(frame=frame)
        arms = set(current.arms)
        means = exact_cell_means(current)
        round_removed: List[RemovedClient] = []
        for client in current.clients:
            client_means = {a: mu for (c, a), mu in means.items() if c == client}
            missing = sorted(arms - set(client_means))
            if missing:
                round_removed.append(
                    RemovedClient(label=client, reason="missing arms", arms=missing)
                )
                continue

            top = max(client_means.values())
            tied = sorted(a for a, mu in client_means.items() if mu == top)
            if len(tied) > 1:
                round_removed.append(
                    RemovedClient(label=client, reason="tied local best", arms=tied)
                )

        if not round_removed:
            break

        for r in round_removed:
            logger.info("removing client '{}' ({}: {})", r.label, r.reason, r.arms)

        removed.extend(round_removed)
        frame = frame[~frame["client"].isin([r.label for r in round_removed])]

    cleaned = RatingsTable(
        frame=frame.reset_index(drop=True),
        issues=list(table.issues),
        dropped=dict(table.dropped),
    )
    return cleaned, removed


def to_empirical_instance(
    table: RatingsTable, name: str = "ingested"
) -> ProblemInstance:
    """empirical instance whose pools are the ratings of each (arm, client) cell

    Raises:
        ValueError: if a cell has no ratings
        InvalidInstanceError: if the instance violates an invariant, e.g. a tied
            local best that `clean` would have removed
    """
    arms, clients = table.arms, table.clients
    if len(arms) < 2:
        raise ValueError(f"need at least 2 arms, got {len(arms)}")

    grouped: Dict[Tuple[str, str], List[float]] = {
        key: [float(r) for r in ratings]
        for key, ratings in table.frame.groupby(["arm", "client"])["rating"]
    }
    pools: List[List[List[float]]] = []
    for arm in arms:
        row: List[List[float]] = []
        for client in clients:
            pool = grouped.get((arm, client))
            if not pool:
                raise ValueError(f"no ratings for arm '{arm}' at client '{client}'")

            row.append(pool)

        pools.append(row)

    means: FloatMatrix = [
        [float(sum(map(Fraction, pool), Fraction(0)) / len(pool)) for pool in row]
        for row in pools
    ]
    instance = ProblemInstance(
        name=name,
        means=means,
        reward_kind="empirical",
        pools=pools,
        arm_labels=arms,
        client_labels=clients,
    )
    report = validate(instance)
    global_ties = [v for v in report.violations if v.rule == "global_tie"]
    if global_ties:
        tied = ", ".join(f"'{arms[k - 1]}'" for k in global_ties[0].arms)
        raise InvalidInstanceError(
            report, f"global best arm not unique after cleanup: {tied}"
        )

    if not report.ok:
        raise InvalidInstanceError(report)

    return instance


class IngestSummary(Node, frozen=True):
    """content of an ingested instance JSON"""

    arms: Sequence[str]
    clients: Sequence[str]
    num_arms: int
    num_clients: int
    means: FloatMatrix
    pool_sizes: Sequence[Sequence[int]]
    removed_clients: Sequence[RemovedClient]
    dropped: Dict[str, int]
    instance: ProblemInstance


def ingest(
    ratings: Optional[Union[Path, str, TextIO]] = None,
    hetrec: Optional[HetrecFiles] = None,
    name: str = "ingested",
) -> IngestSummary:
    """parse (or join), clean and convert a rating table"""
    if (ratings is None) == (hetrec is None):
        raise ValueError("specify exactly one of `ratings` and `hetrec`")

    if hetrec is None:
        assert ratings is not None
        table = parse_ratings_csv(ratings)
    else:
        table = join_hetrec(hetrec)

    cleaned, removed = clean(table)
    instance = to_empirical_instance(cleaned, name=name)
    assert instance.pools is not None
    return IngestSummary(
        arms=cleaned.arms,
        clients=cleaned.clients,
        num_arms=instance.num_arms,
        num_clients=instance.num_clients,
        means=instance.means,
        pool_sizes=[[len(p) for p in row] for row in instance.pools],
        removed_clients=removed,
        dropped=cleaned.dropped,
        instance=instance,
    )
