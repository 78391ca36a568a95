"""Definition store, distillation prompts, candidate pools, and the ledger."""

from __future__ import annotations

import json

import pytest

from abground.knowledge import (
    AbnormalityDefinition,
    CandidatePool,
    GenerationParams,
    HTTPClient,
    ReplayClient,
    SelectionError,
    SelectionLedger,
    StubClient,
    TransportError,
    auto_select_index,
    clean_candidate,
    export_prompt_dictionary,
    generate_candidates,
    load_definition_store,
    load_pool,
    render_prompt,
    select_candidate,
    shipped_definition_store,
    shipped_prompt_dictionary,
)

LUNG_OPACITY_DEF = (
    "Any abnormal focal or generalized opacity or opacities in lung fields "
    "(including but not limited to consolidation, cavity, fibrosis, nodule, "
    "mass, calcification, interstitial thickening)..."
)

SELECTED_LUNG_OPACITY = ("An area of increased density in the lung fields, "
                         "typically appearing as a white or grayish patch.")


class TestDefinitions:
    def test_shipped_store_covers_22_classes(self):
        defs = shipped_definition_store()
        assert len(defs) == 22
        names = {d.class_name for d in defs}
        assert "Lung Opacity" in names and "Nodule / Mass" in names

    def test_empty_definition_rejected(self):
        with pytest.raises(ValueError):
            AbnormalityDefinition("Edema", "   ")

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError):
            AbnormalityDefinition("", "some definition")

    def test_duplicate_class_rejected(self, tmp_path):
        p = tmp_path / "defs.json"
        p.write_text(json.dumps([
            {"class_name": "A", "definition": "x"},
            {"class_name": "A", "definition": "y"},
        ]))
        with pytest.raises(ValueError, match="duplicate"):
            load_definition_store(p)


class TestRenderPrompt:
    def test_template_beginning_and_end(self):
        prompt = render_prompt(
            AbnormalityDefinition("lung opacity", LUNG_OPACITY_DEF))
        assert prompt.rendered_text.startswith(
            "Here is the medical definition of lung opacity: ")
        assert prompt.rendered_text.endswith(
            "provide a concise visual description that could guide "
            "image recognition.")

    def test_definition_embedded_verbatim(self):
        prompt = render_prompt(AbnormalityDefinition("Edema", "Fluid overload."))
        assert '"Fluid overload."' in prompt.rendered_text

    def test_names_all_four_attributes(self):
        prompt = render_prompt(AbnormalityDefinition("Edema", "Fluid overload."))
        for word in ("shape", "intensity", "density", "location"):
            assert word in prompt.rendered_text

    def test_deterministic_and_injective(self):
        a = render_prompt(AbnormalityDefinition("A", "def one"))
        a2 = render_prompt(AbnormalityDefinition("A", "def one"))
        b = render_prompt(AbnormalityDefinition("B", "def one"))
        assert a == a2
        assert a.rendered_text != b.rendered_text


class TestCleaning:
    def test_strips_fences_and_emphasis(self):
        raw = "```text\nA **bright** well-defined *round* patch in the lung.\n```"
        assert clean_candidate(raw) == \
            "A bright well-defined round patch in the lung."

    def test_strips_leading_labels(self):
        raw = "1. Candidate 2: A dense rounded area near the heart border."
        assert clean_candidate(raw) == \
            "A dense rounded area near the heart border."

    def test_drops_refusals_and_short(self):
        assert clean_candidate("I cannot describe medical images.") is None
        assert clean_candidate("Too short.") is None

    def test_strips_trailing_fragment(self):
        raw = "A hazy opacity near the hilum. It also may"
        assert clean_candidate(raw) == "A hazy opacity near the hilum."

    def test_collapses_whitespace(self):
        assert clean_candidate("A  large\n\nirregular   region of the lung.") == \
            "A large irregular region of the lung."


class TestGenerateCandidates:
    def test_stub_returns_fixed_strings(self):
        fixed = ["A round dense patch in the lung fields.",
                 "A bright irregular area near the heart."]
        client = StubClient(lambda prompt, i: fixed[i % 2])
        prompt = render_prompt(AbnormalityDefinition("Edema", "def"))
        pool = generate_candidates(prompt, client, GenerationParams(n=2))
        assert pool.candidates == fixed

    def test_replay_transcript_yields_five(self, tmp_path):
        prompt = render_prompt(AbnormalityDefinition("lung opacity",
                                                     LUNG_OPACITY_DEF))
        transcript = {prompt.rendered_text: [
            "```\nAn area of increased density in the lung fields, typically "
            "appearing as a white or grayish patch.\n```",
            "2. A hazy whitish region obscuring lung markings on the film.",
            "A **patchy** bright opacity spread across the lung fields.",
            "A focal dense white area with irregular borders in the lung.",
            "A grayish cloud-like shadow within the lung on the radiograph.",
        ]}
        path = tmp_path / "transcript.json"
        path.write_text(json.dumps(transcript))
        pool = generate_candidates(prompt, ReplayClient(path),
                                   GenerationParams(n=5))
        assert len(pool.candidates) == 5
        assert pool.candidates[0] == SELECTED_LUNG_OPACITY

    def test_unusable_candidates_shrink_pool(self):
        replies = ["A round dense patch in the lung fields.",
                   "I cannot help with that request.",
                   "short one", ]
        client = StubClient(lambda prompt, i: replies[i])
        prompt = render_prompt(AbnormalityDefinition("Edema", "def"))
        pool = generate_candidates(prompt, client, GenerationParams(n=3))
        assert len(pool.candidates) == 1

    def test_transport_error_persists_nothing(self, tmp_path):
        class FailingClient:
            def complete(self, prompt, params):
                raise TransportError("down", attempts=["attempt 1: down"])

        prompt = render_prompt(AbnormalityDefinition("Edema", "def"))
        out = tmp_path / "pool.json"
        with pytest.raises(TransportError):
            generate_candidates(prompt, FailingClient(), GenerationParams(n=3),
                                out_path=out)
        assert not out.exists()

    def test_pool_persisted_and_reloadable(self, tmp_path):
        client = StubClient(lambda p, i: f"A number {i} dense area in the lung.")
        prompt = render_prompt(AbnormalityDefinition("Edema", "def"))
        out = tmp_path / "pool.json"
        pool = generate_candidates(prompt, client, GenerationParams(n=4), out)
        loaded = load_pool(out)
        assert loaded.candidates == pool.candidates
        assert loaded.params == pool.params

    def test_default_params_match_decoding_config(self):
        params = GenerationParams()
        assert (params.temperature, params.top_p, params.repetition_penalty,
                params.max_tokens, params.n) == (0.7, 0.7, 1.1, 1024, 5)


class TestBulkGeneration:
    def test_bounded_concurrency_and_partial_failure(self, tmp_path):
        import threading

        from abground.knowledge import generate_all_candidates

        lock = threading.Lock()
        live = {"now": 0, "peak": 0}

        class TrackingClient:
            def complete(self, prompt, params):
                with lock:
                    live["now"] += 1
                    live["peak"] = max(live["peak"], live["now"])
                try:
                    if "Edema" in prompt:
                        raise TransportError("down", attempts=["x"])
                    return "A round dense patch in the lung fields."
                finally:
                    with lock:
                        live["now"] -= 1

        defs = [AbnormalityDefinition(n, f"definition of {n}")
                for n in ("Edema", "Cardiomegaly", "Atelectasis", "Nodule")]
        pools, failures = generate_all_candidates(
            defs, TrackingClient(), GenerationParams(n=2),
            out_dir=tmp_path, max_in_flight=2)
        assert set(failures) == {"Edema"}
        assert set(pools) == {"Cardiomegaly", "Atelectasis", "Nodule"}
        assert live["peak"] <= 2
        assert not (tmp_path / "Edema.json").exists()
        assert (tmp_path / "Cardiomegaly.json").exists()


class TestHTTPClient:
    def test_retries_then_transport_error(self):
        sleeps = []
        client = HTTPClient("http://127.0.0.1:1/never", sleep=sleeps.append)
        with pytest.raises(TransportError) as err:
            client.complete("prompt", GenerationParams())
        assert len(err.value.attempts) == 3
        assert sleeps == [1.0, 2.0]

    def test_extract_text_variants(self):
        extract = HTTPClient._extract_text
        assert extract({"choices": [{"text": "abc"}]}) == "abc"
        assert extract({"choices": [{"message": {"content": "xyz"}}]}) == "xyz"
        with pytest.raises(ValueError):
            extract({"choices": []})


class TestSelection:
    def _pool(self):
        return CandidatePool("Edema", [
            "A hazy area of increased brightness in the lung fields.",
            "A dense fluid collection near the costophrenic angle.",
            "Generic words without any attribute hooks whatsoever here.",
        ], GenerationParams(n=5))

    def test_select_records_and_echoes(self, tmp_path):
        ledger = SelectionLedger(tmp_path / "ledger.jsonl")
        prompt = select_candidate(self._pool(), 0, "human", ledger)
        assert prompt.description.startswith("A hazy area")
        assert ledger.selections()["Edema"].selected_index == 0

    def test_out_of_range_index(self):
        with pytest.raises(SelectionError):
            select_candidate(self._pool(), 9, "human")

    def test_reselection_appends_latest_wins(self, tmp_path):
        ledger = SelectionLedger(tmp_path / "ledger.jsonl")
        select_candidate(self._pool(), 0, "human", ledger)
        select_candidate(self._pool(), 1, "human", ledger)
        assert len(ledger.entries()) == 2
        assert ledger.selections()["Edema"].selected_index == 1

    def test_bad_who_rejected(self):
        with pytest.raises(ValueError):
            select_candidate(self._pool(), 0, "robot")

    def test_auto_select_prefers_attribute_rich(self):
        assert auto_select_index(self._pool()) in (0, 1)
        poor = CandidatePool("X", [
            "Generic words without any hooks one bit.",
            "A round dense bright patch in the lung fields.",
        ], GenerationParams(n=5))
        assert auto_select_index(poor) == 1


class TestExport:
    def test_complete_export_matches_shipped_table(self, tmp_path):
        ledger = SelectionLedger(tmp_path / "ledger.jsonl")
        shipped = shipped_prompt_dictionary("vindr")
        for name, description in shipped.items():
            pool = CandidatePool(name, [description], GenerationParams(n=5))
            select_candidate(pool, 0, "human", ledger)
        payload = export_prompt_dictionary(ledger, shipped.keys())
        assert payload["version"] == 1
        assert payload["prompts"] == shipped
        assert len(payload["prompts"]) == 22

    def test_missing_class_named(self, tmp_path):
        ledger = SelectionLedger(tmp_path / "ledger.jsonl")
        pool = CandidatePool("Edema", ["A dense area in the lung fields."],
                             GenerationParams(n=5))
        select_candidate(pool, 0, "human", ledger)
        with pytest.raises(SelectionError, match="Cardiomegaly"):
            export_prompt_dictionary(ledger, ["Edema", "Cardiomegaly"])

    def test_empty_class_set(self, tmp_path):
        ledger = SelectionLedger(tmp_path / "ledger.jsonl")
        assert export_prompt_dictionary(ledger, [])["prompts"] == {}


def test_shipped_dictionaries_cover_both_benchmarks():
    vindr = shipped_prompt_dictionary("vindr")
    padchest = shipped_prompt_dictionary("padchest")
    assert len(vindr) == 22
    assert len(padchest) == 24
    assert vindr["Lung Opacity"] == SELECTED_LUNG_OPACITY
    # the six known classes carry identical descriptions in both tables
    from abground.dataset import shipped_class_map

    cmap = shipped_class_map()
    for pc_name, vindr_name in cmap.known.items():
        assert padchest[pc_name] == vindr[vindr_name]
