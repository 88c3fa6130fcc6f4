"""Shared test utilities: a tiny threaded HTTP mock and a deterministic fixture corpus."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs

from stylometer.corpus import TextSample, content_id


class MockServer:
    """Serve ``routes[path](request) -> (status, body)`` on localhost.

    ``request`` is a dict with ``path``, ``raw`` (bytes), ``json`` (parsed
    JSON body or None) and ``form`` (parsed urlencoded body or None). Every
    request is appended to ``self.requests``.
    """

    def __init__(self, routes):
        self.routes = routes
        self.requests = []
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(n)
                req = {"path": self.path, "raw": raw, "json": None, "form": None}
                ctype = self.headers.get("Content-Type", "")
                if "json" in ctype:
                    req["json"] = json.loads(raw)
                elif "urlencoded" in ctype:
                    req["form"] = {k: v[0] for k, v in parse_qs(raw.decode()).items()}
                server.requests.append(req)
                handler = server.routes.get(self.path)
                if handler is None:
                    status, body = 404, {"error": "no route"}
                else:
                    status, body = handler(req)
                data = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


_HUMAN_ABSTRACTS = [
    "We study masked diffusion models for text. Our analysis covers perplexity and burstiness. "
    "Results show clear differences between model families.",
    "Language models assign probabilities to sequences. We compare several smoothing methods on a small corpus. "
    "The simplest method is surprisingly strong. Longer contexts help only with more data.",
    "Detecting generated text remains difficult. Zero-shot detectors rely on log-probability curvature. "
    "We evaluate them on paraphrased inputs.",
    "Stylometry measures writing style with simple statistics. Sentence length varies across authors. "
    "Lexical diversity captures vocabulary richness. We report both for three corpora.",
    "Grammar checkers flag many kinds of errors. We measure the rate of flagged sentences. "
    "Human writing contains sporadic mistakes while generated text is often clean.",
]

_LLAMA = [
    "This paper studies diffusion models for text. It analyzes perplexity and burstiness. The results show differences.",
    "Language models give probabilities to sequences. The paper compares smoothing methods. Simple methods work well.",
    "Detecting generated text is hard. Detectors use log-probability curvature. They are tested on paraphrases.",
    "Stylometry measures writing style. Sentence length varies. Lexical diversity measures vocabulary.",
    "Grammar checkers find errors. The paper measures flagged sentences. Generated text has fewer mistakes.",
]

_LLADA = [
    "We examine masked diffusion models for text generation. The analysis spans perplexity and burstiness, "
    "and it reveals clear contrasts between families of models.",
    "Probabilities over sequences come from language models. Several smoothing techniques are compared on a modest corpus. "
    "The most basic technique proves surprisingly robust.",
    "Spotting generated text stays challenging. Zero-shot detectors depend on curvature of log-probability. "
    "We assess them using paraphrased inputs and rewritten passages.",
    "Writing style can be quantified with basic statistics. Authors differ in sentence length. "
    "Vocabulary richness is captured by lexical diversity.",
    "Automated grammar checkers detect many error types. We quantify how often sentences are flagged. "
    "People make occasional mistakes, generated passages rarely do.",
]


def fixture_corpus(n_sources=5):
    """Deterministic 20-sample corpus: 5 originals, 3 rephrases per model, 9 generations."""
    samples = []
    sources = []
    for i, text in enumerate(_HUMAN_ABSTRACTS[:n_sources]):
        title = f"Paper {i}: " + text.split(".")[0]
        s = TextSample(content_id(title, text), "human", "source", text, title=title, meta={"row": i + 1})
        sources.append(s)
        samples.append(s)
    for i, src in enumerate(sources):
        for label, outputs in (("llama", _LLAMA), ("llada", _LLADA)):
            if i < 3:
                samples.append(TextSample(content_id(src.id, "rephrase", label), label, "rephrase",
                                          outputs[i], reference=src.text, title=src.title,
                                          meta={"source_id": src.id}))
            if i < 3 or label == "llada" and i < 5 or label == "llama" and i < 4:
                samples.append(TextSample(content_id(src.id, "generation", label), label, "generation",
                                          outputs[(i + 2) % len(outputs)], title=src.title,
                                          meta={"source_id": src.id}))
    return sorted(samples, key=lambda s: s.id)
