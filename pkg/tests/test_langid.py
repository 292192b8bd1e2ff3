import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources

import pytest
from hypothesis import given, strategies as st

from langfid.corpus import EvaluationSample, LanguageTag
from langfid.errors import MappingError, TransportError
from langfid.langid import (
    BUILTIN_LANGUAGES,
    Identification,
    IdentifierBackend,
    TrigramModel,
    identify,
    identify_all,
    language_fidelity,
    read_label_map,
)

DATA = resources.files("langfid") / "data"


def corpus_lines(code):
    return (DATA / f"{code}.txt").read_text(encoding="utf-8").splitlines()


@pytest.fixture
def builtin():
    return IdentifierBackend("builtin_trigram")


def test_builtin_recalls_training_text(builtin):
    assert identify(corpus_lines("en")[0], builtin).tag == LanguageTag("en")
    assert identify(corpus_lines("es")[3], builtin).tag == LanguageTag("es")


@pytest.mark.parametrize("code", BUILTIN_LANGUAGES)
def test_builtin_every_language(builtin, code):
    for line in corpus_lines(code):
        ident = identify(line, builtin)
        assert ident.tag == LanguageTag(code), line
        assert 0.0 <= ident.confidence <= 1.0


def test_builtin_unseen_captions(builtin):
    cases = {
        "es": "Una niña come un helado en la terraza.",
        "de": "Ein Hund schläft neben dem Sofa im Wohnzimmer.",
        "fr": "Une femme promène son chien dans la rue.",
        "nl": "Een man leest de krant in de trein.",
        "ru": "Мальчик читает книгу в комнате.",
        "en": "A man is reading the newspaper on the train.",
    }
    for code, text in cases.items():
        assert identify(text, builtin).tag == LanguageTag(code), text


def test_tie_break_smallest_code():
    m = TrigramModel({"zz": "abc", "aa": "abc"})
    assert m.classify("abc")[0] == "aa"


@given(st.text(min_size=1, max_size=50).filter(str.strip))
def test_builtin_deterministic(text):
    backend = IdentifierBackend("builtin_trigram")
    assert identify(text, backend) == identify(text, backend)


def test_empty_text_rejected(builtin):
    with pytest.raises(ValueError):
        identify("  ", builtin)


def test_unknown_kind():
    with pytest.raises(ValueError):
        IdentifierBackend("glotlid")
    with pytest.raises(ValueError):
        IdentifierBackend("external_command")


FAKE_ID = r"""
import sys
for line in sys.stdin:
    label = "spa_Latn" if "hola" in line else "xyz_Zzzz"
    print(f"{label}\t0.87", flush=True)
"""


def test_external_command(tmp_path):
    script = tmp_path / "fake_id.py"
    script.write_text(FAKE_ID)
    backend = IdentifierBackend(
        "external_command", f"{sys.executable} {script}", {"spa_Latn": LanguageTag("es")}
    )
    with backend:
        ident = identify("hola amigo", backend)
        assert ident == Identification(LanguageTag("es"), 0.87)
        assert [i.tag.code for i in identify_all(["hola", "hola a todos"], backend, parallelism=2)] == ["es", "es"]
        with pytest.raises(MappingError, match="xyz_Zzzz"):
            identify("bonjour", backend)


def test_external_command_missing():
    backend = IdentifierBackend("external_command", "/nonexistent/identifier")
    with pytest.raises(TransportError):
        identify("hola", backend)


class _IdHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"])).decode()
        reply = "__label__rus_Cyrl 0.99" if any("а" <= c <= "я" for c in body) else "__label__eng_Latn 0.5"
        data = reply.encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def test_http_backend(tmp_path):
    server = ThreadingHTTPServer(("127.0.0.1", 0), _IdHandler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        mapfile = tmp_path / "labels.txt"
        mapfile.write_text("__label__rus_Cyrl ru\n__label__eng_Latn en  # english\n")
        url = f"http://127.0.0.1:{server.server_address[1]}/"
        with IdentifierBackend("http_endpoint", url, read_label_map(mapfile)) as backend:
            assert identify("привет мир", backend).tag == LanguageTag("ru")
            assert identify("hello", backend) == Identification(LanguageTag("en"), 0.5)
    finally:
        server.shutdown()


def test_http_backend_unreachable():
    with IdentifierBackend("http_endpoint", "http://127.0.0.1:9/") as backend:
        with pytest.raises(TransportError):
            identify("hola", backend)


def _samples(langs):
    return [EvaluationSample(f"s{i}", LanguageTag(l), "", "x") for i, l in enumerate(langs)]


def test_language_fidelity():
    s = _samples(["es", "de", "fr", "ru"])
    tags = [LanguageTag(c) for c in ["es", "de", "fr", "ru"]]
    assert language_fidelity(s, tags) == 100.0
    assert language_fidelity(s, [LanguageTag("en")] * 4) == 0.0
    assert language_fidelity(s, tags[:3] + [LanguageTag("en")]) == 75.0
    assert language_fidelity(s, [Identification(t, 1.0) for t in tags]) == 100.0
    with pytest.raises(ValueError):
        language_fidelity(s, tags[:2])


@given(st.lists(st.tuples(st.sampled_from(BUILTIN_LANGUAGES), st.sampled_from(BUILTIN_LANGUAGES)), min_size=1),
       st.randoms())
def test_fidelity_permutation_invariant(pairs, rnd):
    samples = _samples([t for t, _ in pairs])
    tags = [LanguageTag(p) for _, p in pairs]
    lf = language_fidelity(samples, tags)
    idx = list(range(len(pairs)))
    rnd.shuffle(idx)
    assert language_fidelity([samples[i] for i in idx], [tags[i] for i in idx]) == lf
    correct = [i for i in idx if tags[i] == samples[i].target_language]
    if correct:
        assert language_fidelity([samples[i] for i in correct], [tags[i] for i in correct]) == 100.0
