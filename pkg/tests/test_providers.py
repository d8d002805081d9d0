import json

import httpx
import pytest
from hypothesis import given, strategies as st

from todsim.dialogue import make_turns
from todsim.providers import (
    CompletionParams,
    HTTPCompletion,
    HTTPTOD,
    ProviderError,
    ProviderErrorKind,
    ScriptedCompletion,
    ScriptedTOD,
    estimate_tokens,
    truncate_at_stops,
)

PARAMS = CompletionParams()


class TestCompletionParams:
    def test_defaults(self):
        assert PARAMS.temperature == 0.5
        assert PARAMS.max_context == 2048

    def test_temperature_range(self):
        with pytest.raises(ValueError):
            CompletionParams(temperature=2.5)

    def test_max_context_positive(self):
        with pytest.raises(ValueError):
            CompletionParams(max_context=0)


class TestEstimateTokens:
    def test_empty(self):
        assert estimate_tokens("") == 0

    def test_ten_words(self):
        assert estimate_tokens("one two three four five six seven eight nine ten") == 13

    def test_hundred_words(self):
        assert estimate_tokens(" ".join(["word"] * 100)) == 130

    def test_custom_ratio(self):
        assert estimate_tokens("a b c d", ratio=1.0) == 4

    @given(st.lists(st.sampled_from(["alpha", "beta", "gamma"]), max_size=40))
    def test_monotone_in_word_count(self, words):
        text = " ".join(words)
        shorter = " ".join(words[:-1]) if words else ""
        assert estimate_tokens(text) >= estimate_tokens(shorter)

    @given(st.text(alphabet="ab ", max_size=30), st.text(alphabet="cd ", max_size=30))
    def test_concatenation_never_shrinks(self, a, b):
        assert estimate_tokens(a + " " + b) >= estimate_tokens(a)


class TestScriptedProviders:
    def test_echoes_script_verbatim(self):
        provider = ScriptedCompletion(["I would like to book a train..."])
        assert provider.complete("Goal:\nConversation:\nUser:", PARAMS) == \
            "I would like to book a train..."

    def test_context_overflow(self):
        provider = ScriptedCompletion(["x"])
        prompt = " ".join(["word"] * 3000)
        with pytest.raises(ProviderError) as err:
            provider.complete(prompt, PARAMS)
        assert err.value.kind is ProviderErrorKind.CONTEXT_OVERFLOW

    def test_exhausted_script_is_remote_error(self):
        provider = ScriptedCompletion([])
        with pytest.raises(ProviderError) as err:
            provider.complete("prompt", PARAMS)
        assert err.value.kind is ProviderErrorKind.REMOTE

    def test_tod_replays_scripted_turn(self):
        reply = ("there are [value_choice] trains that meet your criteria . do you have "
                 "a time you would like to leave or arrive by ?")
        tod = ScriptedTOD([reply])
        assert tod.tod_respond((), "I would like to book a train") == reply

    def test_tod_empty_script(self):
        with pytest.raises(ProviderError) as err:
            ScriptedTOD([]).tod_respond((), "hello")
        assert err.value.kind is ProviderErrorKind.REMOTE

    def test_tod_requires_utterance(self):
        with pytest.raises(ValueError):
            ScriptedTOD(["x"]).tod_respond((), "")

    def test_history_not_mutated(self):
        history = make_turns(["hello", "hi"])
        ScriptedTOD(["reply"]).tod_respond(history, "next")
        assert [t.text for t in history] == ["hello", "hi"]


class TestTruncateAtStops:
    def test_cuts_fabricated_system_turn(self):
        text = "I want a hotel.\nSystem: there are 3 hotels"
        assert truncate_at_stops(text, ("\nSystem:", "<end_dialog>")) == "I want a hotel."

    def test_keeps_end_token(self):
        text = "bye <end_dialog>\nGoal: something else"
        assert truncate_at_stops(text, ("\nSystem:", "<end_dialog>")) == "bye <end_dialog>"

    def test_no_stop_found(self):
        assert truncate_at_stops("plain text", ("\nSystem:", "<end_dialog>")) == "plain text"


def http_completion(handler, **kwargs):
    return HTTPCompletion("http://llm.test/complete", backoff=0.0,
                          transport=httpx.MockTransport(handler), **kwargs)


class TestHTTPCompletion:
    def test_recorded_response(self):
        seen = {}

        def handler(request):
            seen["payload"] = json.loads(request.content)
            return httpx.Response(200, json={"text": "yes, please."})

        assert http_completion(handler).complete("Goal:\nUser:", PARAMS) == "yes, please."
        assert seen["payload"]["prompt"] == "Goal:\nUser:"
        assert seen["payload"]["temperature"] == 0.5
        assert seen["payload"]["stop"] == ["\nSystem:", "<end_dialog>"]
        assert seen["payload"]["max_tokens"] == 2048 - estimate_tokens("Goal:\nUser:")

    def test_openai_response_shape(self):
        def handler(request):
            return httpx.Response(200, json={"choices": [{"text": " sounds good"}]})

        assert http_completion(handler).complete("prompt", PARAMS) == " sounds good"

    def test_server_side_spill_truncated(self):
        def handler(request):
            return httpx.Response(200, json={"text": "ok then\nSystem: fabricated"})

        assert http_completion(handler).complete("prompt", PARAMS) == "ok then"

    def test_retries_then_remote_error(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(500)

        with pytest.raises(ProviderError) as err:
            http_completion(handler, retries=2).complete("prompt", PARAMS)
        assert err.value.kind is ProviderErrorKind.REMOTE
        assert calls["n"] == 3  # first try + 2 retries

    def test_recovers_after_transient_failure(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(500)
            return httpx.Response(200, json={"text": "recovered"})

        assert http_completion(handler).complete("prompt", PARAMS) == "recovered"

    def test_timeout_maps_to_timeout_kind(self):
        def handler(request):
            raise httpx.ConnectTimeout("slow endpoint")

        with pytest.raises(ProviderError) as err:
            http_completion(handler, retries=0).complete("prompt", PARAMS)
        assert err.value.kind is ProviderErrorKind.TIMEOUT

    def test_payload_too_large_is_context_overflow(self):
        def handler(request):
            return httpx.Response(413)

        with pytest.raises(ProviderError) as err:
            http_completion(handler).complete("prompt", PARAMS)
        assert err.value.kind is ProviderErrorKind.CONTEXT_OVERFLOW

    def test_malformed_response(self):
        def handler(request):
            return httpx.Response(200, json={"unrelated": 1})

        with pytest.raises(ProviderError) as err:
            http_completion(handler).complete("prompt", PARAMS)
        assert err.value.kind is ProviderErrorKind.MALFORMED

    def test_client_side_overflow_precheck(self):
        def handler(request):  # pragma: no cover - never reached
            raise AssertionError("request should not be sent")

        with pytest.raises(ProviderError) as err:
            http_completion(handler).complete(" ".join(["w"] * 3000), PARAMS)
        assert err.value.kind is ProviderErrorKind.CONTEXT_OVERFLOW

    def test_auth_header(self):
        def handler(request):
            assert request.headers["Authorization"] == "Bearer sekrit"
            return httpx.Response(200, json={"text": "ok"})

        assert http_completion(handler, token="sekrit").complete("p", PARAMS) == "ok"


class TestHTTPTOD:
    def test_fixture_replay(self):
        def handler(request):
            payload = json.loads(request.content)
            assert payload["user_utterance"] == "book it"
            assert payload["history"] == [
                {"speaker": "user", "text": "hello"},
                {"speaker": "system", "text": "hi"},
            ]
            return httpx.Response(200, json={
                "system_utterance": "would you like me to book that for you ?"})

        tod = HTTPTOD("http://tod.test/respond", backoff=0.0,
                      transport=httpx.MockTransport(handler))
        history = make_turns(["hello", "hi"])
        assert tod.tod_respond(history, "book it") == \
            "would you like me to book that for you ?"

    def test_missing_field_malformed(self):
        def handler(request):
            return httpx.Response(200, json={})

        tod = HTTPTOD("http://tod.test/respond", backoff=0.0,
                      transport=httpx.MockTransport(handler))
        with pytest.raises(ProviderError) as err:
            tod.tod_respond((), "hello")
        assert err.value.kind is ProviderErrorKind.MALFORMED
