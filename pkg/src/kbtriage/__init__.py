"""Knowledge-assisted triage for industrial time series.

The package classifies detected incidents by walking a class tree whose
nodes bind analysis callbacks, stores classified incidents as reusable
instances, and ranks stored instances against live data to suggest
classifications for new incidents.
"""

__version__ = "0.1.0"

from .config import AnalysisParams
from .ontology import (
    CallbackRegistry,
    CallbackResult,
    ClassificationError,
    ClassificationResult,
    GuidanceAction,
    Ontology,
    OntologyClass,
    OntologyError,
    UnknownClassError,
    ancestors,
    class_documentation,
    classify,
    load_ontology,
    parse_ontology,
    serialize_ontology,
    validate,
)
from .tsa import (
    ClusteredDevice,
    DeviceSeries,
    InstanceMatches,
    MatchResult,
    PeriodEstimate,
    SegmentTooShort,
    cluster_devices,
    downsample,
    estimate_period,
    match_instance,
    phase_offset,
    sliding_min_distance,
    znorm,
    znorm_distance,
)
from .callbacks import (
    Incident,
    IncidentContext,
    MatchCache,
    incident_ontology,
    incident_registry,
    learn_normal_range,
)
from .store import (
    InstanceValidationError,
    KnowledgeStore,
    NormalRange,
    StoredInstance,
    UnknownDeviceError,
    UnknownInstanceError,
    VisSettings,
    open_store,
)
from .triage import (
    ClassifiedIncident,
    SeverityMark,
    Suggestion,
    TriageOutcome,
    TriageRun,
    classify_incidents,
    detect_incidents,
    rank_instances,
    resolve_ranges,
    run_triage,
)

__all__ = [name for name in dir() if not name.startswith("_")]
