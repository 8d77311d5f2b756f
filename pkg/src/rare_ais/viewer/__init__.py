"""Textual viewer for experiment reports."""

from rare_ais.viewer.report_viewer import ReportViewerApp

__all__ = ["ReportViewerApp"]
