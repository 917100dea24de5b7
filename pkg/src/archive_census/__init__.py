"""Longitudinal channel census reconstruction from web-archive captures."""

from .cdx import (
    EnumerationCursor,
    EnumerationQuery,
    EnumerationStats,
    FileIndexSource,
    RemoteIndexSource,
    SnapshotRef,
    count_by_format_year,
    enumerate_captures,
    parse_index_line,
)
from .cohorts import CohortSpec, build_cohort, period_label
from .extract import (
    ExtractedFields,
    ParsedCount,
    detect_era,
    extract,
    field_availability,
    parse_count,
)
from .fetch import Fetcher, FetchPolicy, replay_url
from .identifiers import (
    ChannelIdentifier,
    Family,
    FORMAT_TABLE,
    canonical_url,
    is_reserved_path,
    normalize,
    parse_channel_url,
)
from .linker import LinkResult, link, lower_bound_channels
from .stats import (
    CoverageReport,
    LogisticFit,
    estimate_coverage,
    fit_logistic,
    fit_logistic_series,
    pearson,
    spearman,
    stratified_sample,
    topk_overlap,
)
from .store import CensusStore, QueryResult, TimeSeries

__version__ = "0.1.0"
