import csv
import json
from pathlib import Path

from streamtrace.logs import (PREVIOUS_LOG_ABSENT, Category, Level, load_profiles, pair_sessions,
                              parse_log, split_lines)

DATA = Path(__file__).parent / "data"


def corpus():
    data = (DATA / "kodi_corpus.log").read_bytes()
    with open(DATA / "kodi_corpus.tsv", encoding="utf-8", newline="") as fh:
        ann = {int(r["line"]): r["category"] for r in csv.DictReader(fh, delimiter="\t")}
    return data, ann


def category_mismatches(events, ann):
    starts = {e.raw_line_number: e.category.value for e in events}
    bad = []
    for line, cat in ann.items():
        if cat == "continuation":
            if line in starts:
                bad.append((line, cat, starts[line]))
        elif starts.get(line) != cat:
            bad.append((line, cat, starts.get(line)))
    return bad


def test_corpus_size_and_coverage():
    data, ann = corpus()
    assert len(ann) >= 200
    assert {"SessionStart", "PlaybackOpen", "AddonInstall", "Search"} <= set(ann.values())


def test_corpus_classification():
    data, ann = corpus()
    events, summary = parse_log(data)
    assert summary.profile == "kodi_v19"
    assert category_mismatches(events, ann) == []


def test_line_conservation():
    data, ann = corpus()
    events, summary = parse_log(data)
    assert sum(1 + e.continuation_lines for e in events) == len(split_lines(data)) == len(ann)
    assert summary.line_count == len(ann)
    rebuilt = "\n".join(e.message for e in events) + "\n"
    assert rebuilt.encode("utf-8") == data


def test_search_query_decoded_and_raw_kept():
    line = ("2021-01-01 10:00:00.000 T:1 DEBUG <general>: CPythonInvoker(7, "
            "plugin://plugin.video.x/search/?query=tom+%26+jerry&page=1): run")
    events, _ = parse_log(line.encode())
    e = events[0]
    assert e.category is Category.SEARCH
    assert e.extracted["query"] == "tom & jerry"
    assert e.extracted["query_raw"] == "tom+%26+jerry"
    assert e.extracted["addon_id"] == "plugin.video.x"


V17 = b"""2018-05-01 20:00:00.100 T:140  NOTICE: Starting Kodi (17.6 Git:20171114-a9a7a20). Platform: Linux x86 64-bit
2018-05-01 20:00:01.000 T:140  NOTICE: special://home/ is mapped to: /home/bob/.kodi
2018-05-01 20:05:00.000 T:141  NOTICE: VideoPlayer::OpenFile: http://stream.invalid/x.m3u8
2018-05-01 20:06:00.000 T:141   ERROR: EXCEPTION Thrown (PythonToCppException)
Traceback (most recent call last):
  File "default.py", line 1
2018-05-01 20:30:00.000 T:140  NOTICE: application stopped
"""

V16 = b"""20:00:00 T:3000  NOTICE: Starting Kodi (16.1 Git:2016-04-24-c327c53). Platform: Android ARM 32-bit
20:01:00 T:3001  NOTICE: DVDPlayer: Opening: plugin://plugin.video.x/play/?id=1
20:02:00 T:3001 WARNING: something odd
"""


def test_v17_profile():
    events, summary = parse_log(V17)
    assert summary.profile == "kodi_v17"
    assert [e.category for e in events] == [Category.SESSION_START, Category.ACCOUNT_INFO,
                                            Category.PLAYBACK_OPEN, Category.OTHER,
                                            Category.SESSION_STOP]
    assert events[3].continuation_lines == 2 and events[3].level is Level.ERROR
    assert summary.kodi_version_banner == "17.6 Git:20171114-a9a7a20"
    assert summary.first_timestamp.render() == "2018-05-01T20:00:00.100000?"


def test_v16_time_only_stamps_are_undated():
    events, summary = parse_log(V16)
    assert summary.profile == "kodi_v16"
    assert events[1].category is Category.PLAYBACK_OPEN
    assert events[1].extracted["url"] == "plugin://plugin.video.x/play/?id=1"
    assert events[0].timestamp.date_known is False
    assert events[0].timestamp.render() == "T20:00:00?"


def test_crlf_and_undecodable_bytes():
    data = b"2021-01-01 10:00:00.000 T:1 INFO <general>: name \xff here\r\n"
    events, _ = parse_log(data)
    assert events[0].message.encode("utf-8", "surrogateescape") == data[:-2]


def test_leading_unprefixed_lines_kept():
    events, summary = parse_log(b"garbage first\n" + V17)
    assert events[0].category is Category.OTHER and events[0].level is Level.UNKNOWN
    assert events[0].message == "garbage first"


def test_pairing_single_log_warns():
    _, cur = parse_log(V17)
    cur.evidence_file = "home/bob/.kodi/kodi.log"
    out = pair_sessions(cur, None)
    assert [w["kind"] for w in out.warnings] == ["previous_session_log_absent"]
    assert out.warnings[0]["message"].startswith(PREVIOUS_LOG_ABSENT)


def test_pairing_order_and_anomaly():
    _, cur = parse_log(V17)
    _, prev = parse_log(V17.replace(b"2018-05-01", b"2018-04-30"), session_index=1)
    out = pair_sessions(cur, prev)
    assert out.sessions == [prev, cur] and out.warnings == [] and out.anomalies == []
    _, late = parse_log(V17.replace(b"2018-05-01", b"2018-06-30"), session_index=1)
    out = pair_sessions(cur, late)
    assert [a["kind"] for a in out.anomalies] == ["session_order_anomaly"]


def test_profile_override_directory(tmp_path):
    prof = json.loads((Path(__file__).parents[1] / "src/streamtrace/data/log_profiles/kodi_v19.json")
                      .read_text())
    prof["name"] = "custom"
    prof["rules"].insert(0, {"category": "Search", "pattern": "SEARCHED (?P<query>.+)$",
                             "captures": ["query"]})
    (tmp_path / "log_profiles").mkdir()
    (tmp_path / "log_profiles" / "kodi_v19.json").write_text(json.dumps(prof))
    profiles = load_profiles(tmp_path)
    events, summary = parse_log(b"2021-01-01 10:00:00.000 T:1 INFO <general>: SEARCHED cats\n",
                                profiles=profiles)
    assert summary.profile == "custom"
    assert events[0].category is Category.SEARCH and events[0].extracted["query"] == "cats"


def test_empty_log():
    events, summary = parse_log(b"")
    assert events == [] and summary.line_count == 0 and summary.first_timestamp is None
