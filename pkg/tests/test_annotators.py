import json

import httpx
import numpy as np
import pytest

from hybridsim import annotators as ann
from hybridsim.annotators import ContentType, StanceLabel
from hybridsim.chat import ChatClient, ChatSettings, ServiceUnavailable
from hybridsim.metrics import cosine


def chat_stub(reply: str | None = None, status: int = 200, calls: list | None = None):
    def handler(request: httpx.Request) -> httpx.Response:
        if calls is not None:
            calls.append(json.loads(request.content))
        if status != 200:
            return httpx.Response(status)
        return httpx.Response(200, json={"choices": [{"message": {"content": reply}}]})

    settings = ChatSettings(base_url="http://stub/v1", retries=2, backoff=0.0)
    return ChatClient(settings, transport=httpx.MockTransport(handler))


class TestStance:
    def test_empty_lexicon_is_neutral(self):
        backend = ann.LexiconStance(ann.TopicLexicon("x"))
        assert ann.annotate_stance("anything at all", backend) is StanceLabel.NEUTRAL

    def test_lexicon_polarity_and_negation(self):
        backend = ann.LexiconStance(ann.default_lexicon("#MeToo"))
        assert backend("I stand in solidarity with #MeToo") is StanceLabel.SUPPORT
        assert backend("This campaign is overblown nonsense") is StanceLabel.OPPOSE
        assert backend("I do not support this") is StanceLabel.OPPOSE

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            ann.annotate_stance("  ", ann.LexiconStance(ann.TopicLexicon("x")))

    @pytest.mark.parametrize("reply,label", [
        ("Support", StanceLabel.SUPPORT),
        ("I think Oppose.", StanceLabel.OPPOSE),
        ("neutral", StanceLabel.NEUTRAL),
        ("no idea", StanceLabel.NEUTRAL),
    ])
    def test_remote_mapping(self, reply, label):
        calls = []
        backend = ann.RemoteStance(chat_stub(reply, calls=calls), "#MeToo",
                                   ann.LexiconStance(ann.TopicLexicon("x")))
        assert ann.annotate_stance("some tweet", backend) is label
        prompt = calls[0]["messages"][-1]["content"]
        assert prompt.startswith("What's the author's stance on #MeToo?")
        assert "Text: some tweet \nStance: " in prompt

    def test_remote_failure_falls_back_to_lexicon(self):
        backend = ann.RemoteStance(chat_stub(status=503), "#MeToo",
                                   ann.LexiconStance(ann.default_lexicon("#MeToo")))
        assert backend("We stand in solidarity") is StanceLabel.SUPPORT


class TestSentiment:
    def test_empty_and_stopwords(self):
        assert ann.sentiment_intensity("") == 0.0
        assert ann.sentiment_intensity("the of and to a") == 0.0

    def test_repetition_is_mean_of_hits(self):
        assert ann.sentiment_intensity("good good") == ann.sentiment_intensity("good")
        assert 0 < ann.sentiment_intensity("good") <= 1

    def test_negation_flips_polarity(self):
        a = ann.SentimentAnalyzer({"good": 0.5})
        assert a.polarity("good") == 0.5
        assert a.polarity("not very good") == -0.5
        assert a.polarity("not one two three good") == 0.5
        assert a.intensity("not good") == 0.5


class TestContentType:
    @pytest.mark.parametrize("reply,label", [
        ("1. call for action", ContentType.CALL_FOR_ACTION),
        ("testimony", ContentType.TESTIMONY),
        ("3", ContentType.SHARING_OF_OPINION),
        ("Reference to a third party", ContentType.REFERENCE_TO_THIRD_PARTY),
        ("banana", ContentType.OTHER),
    ])
    def test_mapping(self, reply, label):
        assert ann.classify_content_type("t", chat_stub(reply)) is label

    def test_no_backend(self):
        assert ann.classify_content_type("t", None) is ContentType.OTHER

    def test_unavailable(self):
        assert ann.classify_content_type("t", chat_stub(status=500)) is ContentType.OTHER


class TestEmbedder:
    def test_identical_and_self_cosine(self):
        emb = ann.Embedder()
        emb.observe("women speak up")
        v1, v2 = emb("women speak up"), emb("women speak up")
        assert np.array_equal(v1, v2)
        assert cosine(v1, v1) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_vocabulary(self):
        emb = ann.Embedder(dim=64)
        a, b = "alpha beta", "gamma delta"
        assert not {emb.bucket(t) for t in a.split()} & {emb.bucket(t) for t in b.split()}
        assert cosine(emb(a), emb(b)) == 0.0

    def test_idf_downweights_common_terms(self):
        emb = ann.Embedder()
        for text in ("metoo rally", "metoo march", "metoo"):
            emb.observe(text)
        assert emb.idf("metoo") < emb.idf("rally")


class TestToxicity:
    def client(self, handler):
        return ann.ToxicityClient("http://stub/score", transport=httpx.MockTransport(handler))

    def test_stub_score(self):
        c = self.client(lambda r: httpx.Response(200, json={"summaryScore": 0.1426}))
        assert ann.toxicity_score("x", c) == 0.1426

    def test_nested_path(self):
        c = ann.ToxicityClient("http://stub", "attributeScores.TOXICITY.summaryScore",
                               transport=httpx.MockTransport(lambda r: httpx.Response(
                                   200, json={"attributeScores": {"TOXICITY": {"summaryScore": 0.5}}})))
        assert c.score("x") == 0.5

    def test_unavailable(self):
        assert ann.toxicity_score("x", None) is None
        c = self.client(lambda r: httpx.Response(503))
        assert c.score("x") is None

    def test_out_of_range(self):
        c = self.client(lambda r: httpx.Response(200, json={"summaryScore": 1.7}))
        with pytest.raises(ValueError):
            c.score("x")


class TestChatClient:
    def test_retries_then_succeeds(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            if state["n"] < 3:
                return httpx.Response(429)
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        client = ChatClient(ChatSettings(base_url="http://s", retries=3, backoff=0.0),
                            transport=httpx.MockTransport(handler))
        assert client.complete("hi") == "ok"
        assert state["n"] == 3

    def test_gives_up(self):
        with pytest.raises(ServiceUnavailable):
            chat_stub(status=500).complete("hi")

    def test_payload_and_token(self, monkeypatch):
        monkeypatch.setenv("STUB_KEY", "secret")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"choices": [{"message": {"content": "x"}}]})

        client = ChatClient(ChatSettings(base_url="http://s", api_key_env="STUB_KEY"),
                            transport=httpx.MockTransport(handler))
        client.complete("u", system="s")
        assert seen["auth"] == "Bearer secret"
        assert seen["body"]["max_tokens"] == 256 and seen["body"]["temperature"] == 0.0
        assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            ChatSettings(max_tokens=0)
        with pytest.raises(ValueError):
            ChatSettings(temperature=-0.1)


def test_text_annotator_caches_and_handles_empty():
    a = ann.TextAnnotator.offline(ann.default_lexicon("#MeToo"))
    assert a.stance_and_intensity("") == (StanceLabel.NEUTRAL, 0.0)
    first = a.stance_and_intensity("Proud to support #MeToo. This is good.")
    assert first[0] is StanceLabel.SUPPORT and first[1] > 0
    assert a.stance_and_intensity("Proud to support #MeToo. This is good.") == first
