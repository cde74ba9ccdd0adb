"""
Report tables for check results, the c_{n,m} diagnostic, tau gradients
and Lax coefficients. Every table is a pandas DataFrame; text artifacts
render them with ``to_string(index=False)``.
"""

import pandas as pd

from scalars import format_rational

CHECK_COLUMNS = ['check', 'status', 'coefficients', 'first residual', 'detail']
CNM_COLUMNS = ['i', 'm', 'extracted', 'closed form', 'recursion', 'closed form agrees', 'recursion agrees']
TAU_COLUMNS = ['n', 'component', 'value', 'exact through']


def _rational(value):
    return "" if value is None else format_rational(value)


def check_report_frame(reports):
    """
    One row per CheckReport.

    Parameters:
    -----------
    reports : list of CheckReport

    Returns:
    --------
    pandas.DataFrame
    """
    data = []
    for report in reports:
        data.append([
            report.name,
            'PASS' if report.passed else 'FAIL',
            int(report.checked),
            report.residuals[0] if report.residuals else '',
            report.detail,
        ])
    return pd.DataFrame(data, columns=CHECK_COLUMNS)


def cnm_frame(table):
    """c_{n,m} rows from ``verify.check_cnm_tables``."""
    data = []
    for row in table.rows:
        data.append([
            row['i'],
            row['m'],
            _rational(row['extracted']),
            _rational(row['closed_form']),
            _rational(row['recursion']),
            'yes' if row['closed_form_agrees'] else 'NO',
            'yes' if row['recursion_agrees'] else 'no',
        ])
    return pd.DataFrame(data, columns=CNM_COLUMNS)


def tau_frame(grad):
    data = []
    for n in range(grad.n_max + 1):
        for label, key, value, _ in grad.components(n):
            t_exact, tbar_exact = grad.exact[key]
            data.append([n, label, value.to_text(), f"t^{t_exact} tb^{tbar_exact}"])
    return pd.DataFrame(data, columns=TAU_COLUMNS)


def lax_frame(coefficients):
    """Rows of ``verify.lax_coefficients``."""
    return pd.DataFrame(coefficients['coefficients'], columns=['operator', 'hbar', 'xi', 'coefficient'])


def render(frame, title=None):
    """Text block for a report file."""
    body = frame.to_string(index=False) if len(frame) else "(empty)"
    if title:
        return f"{title}\n{body}\n"
    return f"{body}\n"


def failed(reports):
    """Reports that did not pass."""
    return [report for report in reports if not report.passed]
