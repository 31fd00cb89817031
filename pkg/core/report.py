"""
Report Module
Text and JSON renderings of a confluence analysis
"""

import json
import logging
from typing import Dict, List

from core.corners import (
    CONFLUENT,
    NOT_CONFLUENT,
    Analysis,
    Corner,
    CornerResult,
    OracleResult,
    Verdict,
)
from core.metaterms import MetaState, format_where

logger = logging.getLogger(__name__)

ASSUMPTION = "under user-asserted observable termination"
LOCAL_ONLY = "termination not asserted; only local confluence was established"


def render_meta_state(ms: MetaState) -> str:
    if not ms.is_proper and not ms.pending:
        return ms.status
    text = str(ms.store)
    if ms.pending:
        text += " | " + ", ".join(str(g) for g in ms.pending)
    return text


def verdict_to_dict(verdict: Verdict) -> Dict:
    data: Dict[str, object] = {"verdict": verdict.kind}
    if verdict.proof is not None:
        data["proof"] = verdict.proof
    if verdict.split is not None:
        data["split"] = {
            "on": verdict.split.provenance,
            "alternatives": [
                [str(c) for c in alternative] for alternative in verdict.split.alternatives
            ],
            "branches": [verdict_to_dict(branch) for branch in verdict.branches],
        }
    if verdict.witness is not None:
        data["witness"] = verdict.witness
    if verdict.reason is not None:
        data["reason"] = verdict.reason
    return data


def corner_to_dict(index: int, corner: Corner, verdict: Verdict) -> Dict:
    record = {
        "index": index,
        "kind": corner.kind,
        "provenance": corner.provenance,
        "ancestor": render_meta_state(corner.ancestor),
        "left": render_meta_state(corner.left),
        "right": render_meta_state(corner.right),
        "where": format_where(corner.where),
        "proof": None,
        "split": None,
        "witness": None,
        "reason": None,
    }
    record.update(verdict_to_dict(verdict))
    return record


def assumption_note(analysis: Analysis) -> str:
    return ASSUMPTION if analysis.options.assume_termination else LOCAL_ONLY


def to_dict(analysis: Analysis, program_id: str) -> Dict:
    return {
        "program": program_id,
        "mode": analysis.mode,
        "observable": bool(analysis.options.observable),
        "assumption": assumption_note(analysis),
        "summary": analysis.summary,
        "corners": [corner_to_dict(r.index, r.corner, r.verdict) for r in analysis.results],
    }


def to_json(analysis: Analysis, program_id: str) -> str:
    output = json.dumps(to_dict(analysis, program_id), indent=2, sort_keys=True)
    logger.debug("JSON report: %d corner(s), %d bytes", len(analysis.results), len(output))
    return output


def _verdict_lines(verdict: Verdict, indent: str) -> List[str]:
    lines = [f"{indent}verdict: {verdict.kind}"]
    if verdict.proof is not None:
        left = " -> ".join(verdict.proof.get("left") or ["."])
        right = " -> ".join(verdict.proof.get("right") or ["."])
        lines.append(f"{indent}  join ({verdict.proof.get('meet')}): left {left}; right {right}")
    if verdict.split is not None:
        lines.append(f"{indent}  split on {verdict.split.provenance}: {verdict.split}")
        for number, branch in enumerate(verdict.branches, start=1):
            lines.append(f"{indent}  branch {number}:")
            lines.extend(_verdict_lines(branch, indent + "    "))
    if verdict.witness is not None:
        w = verdict.witness
        lines.append(f"{indent}  witness: {w['left']} <- {w['ancestor']} -> {w['right']}")
    if verdict.reason is not None:
        lines.append(f"{indent}  reason: {verdict.reason}")
    return lines


def render_corner(result: CornerResult) -> List[str]:
    corner = result.corner
    return [
        f"[{result.index}] {corner.kind}  {corner.provenance}",
        f"    ancestor: {render_meta_state(corner.ancestor)}",
        f"    left:     {render_meta_state(corner.left)}",
        f"    right:    {render_meta_state(corner.right)}",
        f"    where:    {format_where(corner.where)}",
    ] + _verdict_lines(result.verdict, "    ")


def render_text(analysis: Analysis, program_id: str) -> str:
    lines = [
        f"Program: {program_id}",
        f"Mode: {analysis.mode}{' (observable)' if analysis.options.observable else ''}",
        f"Corners: {len(analysis.results)}",
        "",
    ]
    for result in analysis.results:
        lines.extend(render_corner(result))
        lines.append("")
    lines.append(f"Summary: {analysis.summary}")
    if analysis.summary == CONFLUENT:
        lines.append(f"  ({ASSUMPTION})")
    elif analysis.summary != NOT_CONFLUENT and not analysis.options.assume_termination:
        lines.append(f"  ({LOCAL_ONLY})")
    return "\n".join(lines)


def render_corners(corners: List[Corner], structured: bool = False) -> str:
    """Generated corners without any join search"""
    if structured:
        records = [
            {
                "index": i,
                "kind": c.kind,
                "provenance": c.provenance,
                "ancestor": render_meta_state(c.ancestor),
                "left": render_meta_state(c.left),
                "right": render_meta_state(c.right),
                "where": format_where(c.where),
            }
            for i, c in enumerate(corners, start=1)
        ]
        return json.dumps({"corners": records}, indent=2, sort_keys=True)
    lines = []
    for i, c in enumerate(corners, start=1):
        lines.append(f"[{i}] {c.kind}  {c.provenance}")
        lines.append(f"    {render_meta_state(c.left)}  <=  {render_meta_state(c.ancestor)}  =>  {render_meta_state(c.right)}")
        lines.append(f"    where {format_where(c.where)}")
    return "\n".join(lines)


def render_oracle(rows: List[Dict], structured: bool = False) -> str:
    """Rows carry index, kind, verdict and the OracleResult fields"""
    if structured:
        return json.dumps({"corners": rows}, indent=2, sort_keys=True)
    lines = []
    for row in rows:
        status = "agreement" if row["agreement"] else "MISMATCH"
        line = f"[{row['index']}] {row['kind']:<7} {row['verdict']:<14} {status}  ({row['checked']} checked, {row['undecided']} undecided)"
        if row.get("details"):
            line += f"  {row['details']}"
        lines.append(line)
    return "\n".join(lines)


def oracle_row(result: CornerResult, oracle: OracleResult) -> Dict:
    return {
        "index": result.index,
        "kind": result.corner.kind,
        "verdict": result.verdict.kind,
        "agreement": oracle.agreement,
        "checked": oracle.checked,
        "undecided": oracle.undecided,
        "details": oracle.details,
    }


__all__ = [
    "oracle_row",
    "render_corners",
    "render_oracle",
    "render_text",
    "to_dict",
    "to_json",
]
