"""In-process chat-completions server for deterministic tests and dry runs.

The server speaks the subset of the OpenAI wire format the judge uses.
Replies come from a *responder*: ``responder(request_body) -> str`` for a
200 reply, or ``(status, text)`` to fail with that status.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Union

from .judge import JudgeVerdict, caption_from_prompt, format_verdict

Reply = Union[str, tuple[int, str]]
Responder = Callable[[dict[str, Any]], Reply]


def verdict_responder(flag_false: Callable[[str], bool] = lambda caption: False, score: float = 0.95) -> Responder:
    """Answer every judge prompt with a well-formed verdict.

    ``flag_false(caption)`` decides which captions are judged not fully in language.
    """

    def respond(body: dict[str, Any]) -> str:
        caption = caption_from_prompt(body["messages"][-1]["content"])
        bad = flag_false(caption)
        return format_verdict(
            JudgeVerdict(
                config_name="",
                language_guess="Unknown",
                language_score=0.5 if bad else score,
                fully_in_language=not bad,
                summary="Contains foreign words." if bad else "Consistent.",
            )
        )

    return respond


def scripted_responder(replies: list[Reply]) -> Responder:
    """Serve ``replies`` in order, repeating the last one forever."""
    lock = threading.Lock()
    state = {"i": 0}

    def respond(body: dict[str, Any]) -> Reply:
        with lock:
            i = min(state["i"], len(replies) - 1)
            state["i"] += 1
        return replies[i]

    return respond


class MockChatServer:
    """``with MockChatServer(responder) as srv: ... srv.base_url ...``"""

    def __init__(self, responder: Responder, host: str = "127.0.0.1", port: int = 0):
        self.responder = responder
        self.requests: list[dict[str, Any]] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:
                if self.path.rstrip("/") != "/v1/chat/completions":
                    self._send(404, {"error": "not found"})
                    return
                try:
                    body = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))))
                except ValueError:
                    self._send(400, {"error": "bad json"})
                    return
                with outer._lock:
                    outer.requests.append({"body": body, "authorization": self.headers.get("Authorization")})
                reply = outer.responder(body)
                if isinstance(reply, tuple):
                    status, text = reply
                    self._send(status, {"error": text})
                    return
                self._send(
                    200,
                    {
                        "id": "mock",
                        "object": "chat.completion",
                        "model": body.get("model"),
                        "choices": [{"index": 0, "message": {"role": "assistant", "content": reply}, "finish_reason": "stop"}],
                    },
                )

            def _send(self, status: int, payload: dict[str, Any]) -> None:
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args: Any) -> None:
                pass

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> MockChatServer:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> MockChatServer:
        return self.start()

    def __exit__(self, *exc: Any) -> None:
        self.stop()
