import pytest

from waiterbot.llm import (
    BackendConfig,
    BackendError,
    BackendUnavailable,
    Menu,
    MenuItem,
    ProtocolError,
    RuleBackend,
    StubTransport,
    TransportError,
    complete,
    format_understand_line,
    parse_understand_line,
    rule_parse,
)
from waiterbot.tasks import ParsedTask, default_registry


@pytest.fixture
def menu():
    return Menu(
        [
            MenuItem("orange juice", "freshly squeezed"),
            MenuItem("juice", "plain juice"),
            MenuItem("cola", "a chilled cola"),
        ]
    )


@pytest.fixture
def registry():
    return default_registry()


class TestMenu:
    def test_duplicate_after_normalization_rejected(self):
        with pytest.raises(ValueError):
            Menu([MenuItem("Cola", ""), MenuItem(" cola ", "")])

    def test_description_text_lists_items(self, menu):
        text = menu.description_text()
        assert text.startswith("We have ")
        assert "cola (a chilled cola)" in text


class TestRuleParse:
    def test_bring_with_item(self, menu, registry):
        parsed = rule_parse("Could you bring me an orange juice?", menu, registry)
        assert parsed == ParsedTask("serve_order", {"item": "orange juice"}, 1.0)

    def test_longest_menu_match_wins(self, menu, registry):
        parsed = rule_parse("I'd like orange juice please", menu, registry)
        assert parsed.slots["item"] == "orange juice"

    def test_shorter_item_still_matches_alone(self, menu, registry):
        parsed = rule_parse("please serve juice", menu, registry)
        assert parsed.slots["item"] == "juice"

    def test_menu_question(self, menu, registry):
        assert rule_parse("What do you have?", menu, registry).name == "describe_menu"

    def test_clean_request(self, menu, registry):
        assert rule_parse("please clear the table", menu, registry).name == "clean_table"

    def test_fallback_to_casual_chat(self, menu, registry):
        parsed = rule_parse("Nice weather today", menu, registry)
        assert parsed == ParsedTask("casual_chat", {}, 0.5)

    def test_serve_trigger_without_item_falls_through(self, menu, registry):
        parsed = rule_parse("bring me happiness", menu, registry)
        assert parsed.name == "casual_chat"

    def test_unicode_apostrophe_normalized(self, menu, registry):
        parsed = rule_parse("I’d like a cola", menu, registry)
        assert parsed.name == "serve_order"

    def test_total_over_arbitrary_text(self, menu, registry):
        for text in ("", "???", "br1ng c0la", "   "):
            assert rule_parse(text, menu, registry).name in registry


class TestUnderstandLine:
    def test_round_trip(self, registry):
        parsed = ParsedTask("serve_order", {"item": "cola"}, 1.0)
        line = format_understand_line(parsed)
        assert line == "task=serve_order; slots=item:cola"
        assert parse_understand_line(line, registry) == parsed

    def test_unknown_task_falls_back(self, registry):
        parsed = parse_understand_line("task=fly_to_moon; slots=", registry)
        assert parsed == ParsedTask("casual_chat", {}, 0.0)

    def test_garbage_falls_back(self, registry):
        assert parse_understand_line("complete nonsense", registry).name == "casual_chat"
        assert parse_understand_line("", registry).name == "casual_chat"

    def test_missing_required_slot_falls_back(self, registry):
        parsed = parse_understand_line("task=serve_order; slots=", registry)
        assert parsed == ParsedTask("casual_chat", {}, 0.0)

    def test_extra_slots_dropped(self, registry):
        parsed = parse_understand_line("task=serve_order; slots=item:cola,mood:happy", registry)
        assert parsed.slots == {"item": "cola"}

    def test_never_raises(self, registry):
        for text in ("task=", "task=serve_order", "task=serve_order; slots=item",
                     "task=serve_order; slots=:cola", "slots=item:cola"):
            parsed = parse_understand_line(text, registry)
            assert parsed.name == "casual_chat"


class TestComplete:
    def config(self, **kw):
        defaults = dict(mode="stub", backoff_s=0.0)
        defaults.update(kw)
        return BackendConfig(**defaults)

    def test_stub_returns_scripted_content_and_records(self):
        stub = StubTransport([StubTransport.reply("task=serve_order; slots=item:cola")])
        out = complete(self.config(), [{"role": "user", "content": "hi"}], transport=stub)
        assert out == "task=serve_order; slots=item:cola"
        assert len(stub.requests) == 1
        assert stub.requests[0]["url"].endswith("/v1/chat/completions")
        assert stub.requests[0]["body"]["messages"][0]["content"] == "hi"

    def test_missing_choices_is_protocol_error(self):
        stub = StubTransport([{"no_choices": True}])
        with pytest.raises(ProtocolError):
            complete(self.config(), [], transport=stub)

    def test_two_failures_then_success(self):
        stub = StubTransport(
            [TransportError("boom"), TransportError("boom"), StubTransport.reply("ok")]
        )
        out = complete(self.config(max_retries=3), [], transport=stub)
        assert out == "ok"
        assert len(stub.requests) == 3

    def test_exhausted_retries_raise_unavailable(self):
        stub = StubTransport([TransportError("boom")] * 4)
        with pytest.raises(BackendUnavailable):
            complete(self.config(max_retries=2), [], transport=stub)
        assert len(stub.requests) == 3  # 1 attempt + 2 retries

    def test_rules_mode_has_no_endpoint(self):
        with pytest.raises(BackendError):
            complete(BackendConfig(mode="rules"), [])

    def test_bearer_token_from_env(self, monkeypatch):
        monkeypatch.setenv("LLM_API_KEY", "sekrit")
        stub = StubTransport([StubTransport.reply("ok")])
        complete(self.config(), [], transport=stub)
        assert stub.requests[0]["headers"]["Authorization"] == "Bearer sekrit"

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BackendConfig(mode="remote")  # endpoint+model required
        with pytest.raises(ValueError):
            BackendConfig(temperature=3.0)
        with pytest.raises(ValueError):
            BackendConfig(mode="psychic")


class TestRuleBackendOffline:
    def test_no_network_activity(self, menu, registry, monkeypatch):
        import waiterbot.llm as llm_module

        def poisoned_post(*args, **kwargs):
            raise AssertionError("rules/stub modes must never touch the network")

        monkeypatch.setattr(llm_module.requests, "post", poisoned_post)
        backend = RuleBackend(registry, menu)
        backend.understand("bring me a cola")
        backend.respond("bring me a cola")
        stub = StubTransport([StubTransport.reply("ok")])
        complete(BackendConfig(mode="stub", backoff_s=0.0), [], transport=stub)

    def test_understand_emits_wire_line(self, menu, registry):
        line = RuleBackend(registry, menu).understand("bring me a cola")
        assert line == "task=serve_order; slots=item:cola"

    def test_respond_with_parse_names_item(self, menu, registry):
        backend = RuleBackend(registry, menu)
        parsed = ParsedTask("serve_order", {"item": "cola"}, 1.0)
        assert "cola" in backend.respond("bring me a cola", parsed)


class TestRemoteBackendIntegration:
    def test_pipeline_over_stubbed_wire(self, menu, registry):
        from waiterbot.llm import RemoteBackend
        from waiterbot.tasks import Pipeline, build_prompts

        stub = StubTransport(
            [
                StubTransport.reply("task=serve_order; slots=item:cola"),
                StubTransport.reply("One cola, coming right up!"),
            ]
        )
        config = BackendConfig(mode="stub", endpoint="http://llm.local", model="demo",
                               backoff_s=0.0)
        prompts = build_prompts("Five tables.", registry, menu)
        backend = RemoteBackend(config, prompts, transport=stub)
        pipe = Pipeline(registry, menu, backend, mode="sequential")
        parsed, response = pipe.handle("bring me a cola")
        assert parsed == ParsedTask("serve_order", {"item": "cola"}, 1.0)
        assert response == "One cola, coming right up!"
        bodies = [r["body"] for r in stub.requests]
        assert bodies[0]["messages"][0]["content"] == prompts.understand_prompt
        assert bodies[1]["messages"][0]["content"] == prompts.respond_prompt
        # sequential mode feeds the parse into the respond request
        assert "task=serve_order; slots=item:cola" in bodies[1]["messages"][1]["content"]
        assert bodies[0]["model"] == "demo"

    def test_understand_failure_falls_back_to_rules(self, menu, registry):
        from waiterbot.llm import RemoteBackend
        from waiterbot.tasks import Pipeline, build_prompts

        stub = StubTransport([TransportError("down")] * 8)
        config = BackendConfig(mode="stub", endpoint="http://llm.local", model="demo",
                               max_retries=1, backoff_s=0.0)
        backend = RemoteBackend(config, build_prompts("env", registry, menu), transport=stub)
        pipe = Pipeline(registry, menu, backend, mode="sequential")
        parsed, response = pipe.handle("bring me a cola")
        assert parsed.name == "serve_order"  # rule fallback parsed it
        from waiterbot.tasks import APOLOGY_LINE

        assert response == APOLOGY_LINE
