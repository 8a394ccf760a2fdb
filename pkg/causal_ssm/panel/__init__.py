from causal_ssm.panel.ingest import derive_graph, ingest_panel, panel_frame, split_by_region, write_panel
from causal_ssm.panel.models import StoreRole, TimeSeriesPanel, region_rows

__all__ = [
    "StoreRole",
    "TimeSeriesPanel",
    "derive_graph",
    "ingest_panel",
    "panel_frame",
    "region_rows",
    "split_by_region",
    "write_panel",
]
