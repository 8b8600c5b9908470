"""Generate the annotated log corpus used by the log-classification tests.

Each emitted line is annotated with the category the line was written to
represent, independently of the parser: ``continuation`` for lines that
belong to the event above them. Run from this directory to regenerate
``kodi_corpus.log`` and ``kodi_corpus.tsv``.
"""
import random
from pathlib import Path
from urllib.parse import quote_plus

HERE = Path(__file__).resolve().parent


def stamp(t: int) -> str:
    h, rem = divmod(t, 3600)
    m, s = divmod(rem, 60)
    return f"2021-11-{20 + h // 24:02d} {h % 24:02d}:{m:02d}:{s:02d}.{(t * 37) % 1000:03d}"


def line(t: int, level: str, comp: str, body: str, thread: int = 0) -> str:
    return f"{stamp(t)} T:{thread or 1000 + t % 7}  {level:>7} <{comp}>: {body}"


NOISE = [
    ("DEBUG", "general", "CGUIWindowManager::PreviousWindow: Deactivate"),
    ("DEBUG", "general", "Loading skin file: DialogBusy.xml, load type: KEEP_IN_MEMORY"),
    ("INFO", "general", "CVideoDatabase::UpdateOldVersion - Video database update done"),
    ("DEBUG", "general", "CCurlFile::Open(0x7f0a) http://api.invalid/v1/list?page=2"),
    ("WARNING", "general", "CSkinInfo: failed to load skin settings"),
    ("INFO", "general", "CPythonInvoker(12, plugin.video.example): script successfully run"),
    ("DEBUG", "general", "ffmpeg[0x7f]: [hls] Opening 'http://cdn.invalid/seg42.ts' for reading"),
    ("INFO", "general", "Loading settings for profile Master user"),
    ("ERROR", "general", "EXCEPTION Thrown (PythonToCppException) : -->Python callback/script returned"),
]
TRACEBACK = [
    "Error Type: <class 'urllib.error.HTTPError'>",
    "Error Contents: HTTP Error 403: Forbidden",
    "Traceback (most recent call last):",
    '  File "/storage/.kodi/addons/plugin.video.example/default.py", line 88, in <module>',
    "    resp = urlopen(req)",
    "-->End of Python script error report<--",
]
ADDONS = ["plugin.video.example", "plugin.video.livestreams", "repository.fixture",
          "script.module.resolver", "plugin.video.sports"]
QUERIES = ["match of the day", "new films 2021", "ü-boot", "tom & jerry", "live tv"]
URLS = ["http://stream.invalid/live/ch1.m3u8", "smb://nas/movies/film.mkv",
        "plugin://plugin.video.sports/play/?id=88", "/storage/videos/home.mp4",
        "https://cdn.invalid/vod/title.mp4|User-Agent=Kodi"]


def build(seed: int = 2021):
    rng = random.Random(seed)
    out = []  # (text, category)
    t = 0

    def add(level, comp, body, cat, thread=0):
        nonlocal t
        t += rng.randrange(1, 40)
        out.append((line(t, level, comp, body, thread), cat))

    add("INFO", "general", "-----------------------------------------------------------------------",
        "Other")
    add("INFO", "general", "Starting Kodi (19.3 (19.3.0) Git:20211024-ff0a5ad6f5). "
        "Platform: Android ARM 32-bit", "SessionStart")
    add("INFO", "general", "Using Release Kodi x32", "Other")
    add("INFO", "general", "special://home/ is mapped to: /storage/emulated/0/Android/data/"
        "org.xbmc.kodi/files/.kodi", "AccountInfo")
    add("INFO", "general", "special://profile/ is mapped to: special://masterprofile/", "AccountInfo")
    while len(out) < 230:
        r = rng.random()
        a = rng.choice(ADDONS)
        if r < 0.35:
            lv, comp, body = rng.choice(NOISE)
            add(lv, comp, body, "Other")
            if body.startswith("EXCEPTION"):
                for tb in TRACEBACK:
                    out.append((tb, "continuation"))
        elif r < 0.47:
            url = rng.choice(URLS)
            if rng.random() < 0.5:
                add("INFO", "general", f"VideoPlayer::OpenFile: {url}", "PlaybackOpen")
            else:
                add("INFO", "general", f"CApplication::PlayFile: opening {url}", "PlaybackOpen")
        elif r < 0.57:
            v = f"{rng.randrange(1, 5)}.{rng.randrange(10)}.{rng.randrange(10)}"
            choice = rng.randrange(3)
            if choice == 0:
                add("INFO", "general", f"CAddonInstallJob[{a}]: Installing from "
                    f"special://home/addons/packages/{a}-{v}.zip", "AddonInstall")
            elif choice == 1:
                add("INFO", "general", f"CAddonMgr::FindAddons: {a} v{v} installed", "AddonInstall")
            else:
                add("INFO", "general", f"CAddonInstallJob[{a}]: Installation completed",
                    "AddonInstall")
        elif r < 0.63:
            v = f"{rng.randrange(1, 5)}.{rng.randrange(10)}.{rng.randrange(10)}"
            add("INFO", "general", f"CAddonMgr::FindAddons: {a} v{v} updated", "AddonUpdate")
        elif r < 0.78:
            q = quote_plus(rng.choice(QUERIES))
            add("DEBUG", "general", f"CPythonInvoker(7, plugin://{a}/search/?query={q}&page=1): "
                f"the source file to load is \"{a}/default.py\"", "Search")
        elif r < 0.82:
            add("INFO", "general", f"{a}: logged in as investigator_{rng.randrange(100)}",
                "AccountInfo")
        else:
            add("DEBUG", "general", "GetString: missing string id 30012", "Other")
    add("INFO", "general", "Quitting Kodi", "SessionStop")
    add("INFO", "general", "Application stopped", "SessionStop")
    return out


def main():
    rows = build()
    (HERE / "kodi_corpus.log").write_bytes(("\n".join(r[0] for r in rows) + "\n").encode("utf-8"))
    with open(HERE / "kodi_corpus.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("line\tcategory\n")
        for n, (_, cat) in enumerate(rows, 1):
            fh.write(f"{n}\t{cat}\n")


if __name__ == "__main__":
    main()
