"""Task trees, device covers, and interaction-model continuity scoring."""

import itertools
import json
import random

import pytest

from hmtd.errors import InvalidModel, ParseError, UncoverableNeed
from hmtd.taskmodel import (
    Arrow,
    Channel,
    CttNode,
    DeviceDescriptor,
    Entity,
    EntityKind,
    IrvoModel,
    Modality,
    TaskCategory,
    continuity_score,
    derive_configurations,
    devices_from_dict,
    irvo_from_dict,
    irvo_to_dict,
    load_devices,
    load_irvo,
    load_task_tree,
    task_tree_from_dict,
    task_tree_to_dict,
    validate_irvo,
)
from support import FIXTURES


def leaf(name, needs=(), category=TaskCategory.INTERACTION, op=None):
    return CttNode(
        name=name,
        category=category,
        operator_to_next=op,
        modality_needs=frozenset(needs),
    )


def user_model(n_sources, frames=()):
    """A single user perceiving n sources visually."""
    entities = [Entity("U", EntityKind.USER)]
    arrows = []
    kinds = [EntityKind.REAL_TOOL, EntityKind.VIRTUAL_TOOL, EntityKind.REAL_OBJECT, EntityKind.VIRTUAL_OBJECT]
    for i in range(n_sources):
        eid = f"S{i}"
        entities.append(Entity(eid, kinds[i % 4]))
        arrows.append(Arrow(eid, "U", Channel.VISUAL))
    return IrvoModel(tuple(entities), tuple(arrows), tuple(frozenset(f) for f in frames))


class TestValidation:
    def test_config1_fixture_is_valid(self):
        assert validate_irvo(load_irvo(FIXTURES / "irvo/config1.json")) == []

    def test_config2_fixture_is_valid(self):
        assert validate_irvo(load_irvo(FIXTURES / "irvo/config2.json")) == []

    def test_sensor_feeding_real_side_is_flagged(self):
        model = IrvoModel(
            entities=(
                Entity("U", EntityKind.USER),
                Entity("S1", EntityKind.SENSOR),
                Entity("Tr", EntityKind.REAL_TOOL),
            ),
            arrows=(Arrow("S1", "Tr", Channel.DATA),),
        )
        violations = validate_irvo(model)
        assert [v.code for v in violations] == ["sensor-direction"]

    def test_effector_driven_from_real_side_is_flagged(self):
        model = IrvoModel(
            entities=(Entity("E", EntityKind.EFFECTOR), Entity("Tr", EntityKind.REAL_TOOL)),
            arrows=(Arrow("Tr", "E", Channel.DATA),),
        )
        assert [v.code for v in validate_irvo(model)] == ["effector-direction"]

    def test_dangling_arrow_is_flagged(self):
        model = IrvoModel(
            entities=(Entity("U", EntityKind.USER),),
            arrows=(Arrow("U", "GHOST", Channel.ACTION),),
        )
        assert [v.code for v in validate_irvo(model)] == ["dangling-arrow"]

    def test_singleton_frame_is_flagged(self):
        model = user_model(2, frames=[["S0"]])
        assert [v.code for v in validate_irvo(model)] == ["frame-too-small"]

    def test_frame_of_transducers_is_flagged(self):
        model = IrvoModel(
            entities=(
                Entity("S1", EntityKind.SENSOR),
                Entity("E", EntityKind.EFFECTOR),
            ),
            arrows=(),
            fusion_frames=(frozenset({"S1", "E"}),),
        )
        assert [v.code for v in validate_irvo(model)] == ["frame-too-small"]


class TestContinuity:
    def test_config1_scores_four(self):
        assert continuity_score(load_irvo(FIXTURES / "irvo/config1.json")) == 4

    def test_config2_scores_two(self):
        assert continuity_score(load_irvo(FIXTURES / "irvo/config2.json")) == 2

    def test_user_without_perceptual_arrows_scores_zero(self):
        model = IrvoModel(
            entities=(Entity("U", EntityKind.USER), Entity("Tr", EntityKind.REAL_TOOL)),
            arrows=(Arrow("U", "Tr", Channel.ACTION),),
        )
        assert continuity_score(model) == 0

    def test_invalid_model_raises(self):
        model = IrvoModel(
            entities=(Entity("U", EntityKind.USER),),
            arrows=(Arrow("GHOST", "U", Channel.VISUAL),),
        )
        with pytest.raises(InvalidModel):
            continuity_score(model)

    def test_fusing_two_sources_reduces_score_by_exactly_one(self):
        rng = random.Random(4242)
        for _ in range(300):
            n = rng.randrange(2, 9)
            # start from disjoint pair frames over distinct sources
            frames = []
            pool = list(range(n))
            rng.shuffle(pool)
            while len(pool) >= 2 and rng.random() < 0.4:
                a, b = pool.pop(), pool.pop()
                frames.append([f"S{a}", f"S{b}"])
            base = user_model(n, frames)
            before = continuity_score(base)
            # pick two entities in distinct groups and fuse them
            groups: dict[str, int] = {}
            for i, frame in enumerate(frames):
                for m in frame:
                    groups[m] = i
            candidates = [f"S{i}" for i in range(n)]
            a = rng.choice(candidates)
            others = [
                c
                for c in candidates
                if groups.get(c, f"solo-{c}") != groups.get(a, f"solo-{a}")
            ]
            if not others:
                continue
            b = rng.choice(others)
            fused = IrvoModel(
                base.entities, base.arrows, base.fusion_frames + (frozenset({a, b}),)
            )
            assert continuity_score(fused) == before - 1

    def test_score_invariant_under_relabeling_and_reordering(self):
        model = load_irvo(FIXTURES / "irvo/config2.json")
        rng = random.Random(7)
        for _ in range(25):
            ids = [e.entity_id for e in model.entities]
            renamed = {eid: f"N{i}" for i, eid in enumerate(rng.sample(ids, len(ids)))}
            entities = [
                Entity(renamed[e.entity_id], e.kind, e.label) for e in model.entities
            ]
            arrows = [Arrow(renamed[a.from_id], renamed[a.to_id], a.channel) for a in model.arrows]
            frames = [frozenset(renamed[m] for m in f) for f in model.fusion_frames]
            rng.shuffle(entities)
            rng.shuffle(arrows)
            rng.shuffle(frames)
            relabeled = IrvoModel(tuple(entities), tuple(arrows), tuple(frames))
            assert continuity_score(relabeled) == continuity_score(model)


class TestDeviceDerivation:
    def referential(self):
        return load_devices(FIXTURES / "devices/referential.json")

    def test_step4_yields_the_two_expected_configurations(self):
        tree = load_task_tree(FIXTURES / "ctt/step4.json")
        assert tree.needs() == frozenset(
            {Modality.VISUAL_OUT, Modality.TAG_IN, Modality.SELECT_IN, Modality.AUDIO_OUT, Modality.AUDIO_IN}
        )
        configs = derive_configurations(tree, self.referential())
        assert len(configs) == 2
        assert configs[0].devices == ("data-glove", "headset-mic", "hmd-opaque", "rfid-palm-reader")
        assert configs[1].devices == (
            "data-glove",
            "headset-mic",
            "hmd-see-through-camera",
            "rfid-palm-reader",
        )

    def test_empty_needs_yields_one_empty_configuration(self):
        tree = leaf("idle", needs=())
        configs = derive_configurations(tree, self.referential())
        assert len(configs) == 1
        assert configs[0].devices == ()

    def test_uncoverable_need_names_the_modality(self):
        tree = leaf("type a report", needs={Modality.TEXT_IN})
        with pytest.raises(UncoverableNeed, match="TextIn"):
            derive_configurations(tree, self.referential())

    def test_outputs_are_covers_and_minimal(self):
        tree = load_task_tree(FIXTURES / "ctt/step4.json")
        referential = self.referential()
        by_id = {d.device_id: d for d in referential}
        needs = tree.needs()
        for cfg in derive_configurations(tree, referential):
            provided = frozenset(itertools.chain.from_iterable(by_id[d].provides for d in cfg.devices))
            assert needs <= provided
            assert needs <= cfg.covered_needs
            for dropped in cfg.devices:
                rest = [d for d in cfg.devices if d != dropped]
                rest_provides = frozenset(
                    itertools.chain.from_iterable(by_id[d].provides for d in rest)
                )
                assert not needs <= rest_provides, f"{dropped} is removable"

    def test_exclusivity_blocks_conflicting_sets(self):
        devices = [
            DeviceDescriptor("a", frozenset({Modality.VISUAL_OUT}), frozenset({"b"})),
            DeviceDescriptor("b", frozenset({Modality.AUDIO_OUT}), frozenset({"a"})),
            DeviceDescriptor("c", frozenset({Modality.VISUAL_OUT, Modality.AUDIO_OUT})),
        ]
        tree = leaf("watch and listen", needs={Modality.VISUAL_OUT, Modality.AUDIO_OUT})
        configs = derive_configurations(tree, devices)
        assert [cfg.devices for cfg in configs] == [("c",)]

    def test_order_is_size_then_lexicographic(self):
        devices = [
            DeviceDescriptor("z-combo", frozenset({Modality.VISUAL_OUT, Modality.AUDIO_OUT})),
            DeviceDescriptor("a-screen", frozenset({Modality.VISUAL_OUT})),
            DeviceDescriptor("b-speaker", frozenset({Modality.AUDIO_OUT})),
        ]
        tree = leaf("watch and listen", needs={Modality.VISUAL_OUT, Modality.AUDIO_OUT})
        configs = derive_configurations(tree, devices)
        assert [cfg.devices for cfg in configs] == [("z-combo",), ("a-screen", "b-speaker")]


class TestDocuments:
    def test_step4_fixture_parses_with_expected_names(self):
        tree = load_task_tree(FIXTURES / "ctt/step4.json")
        assert tree.name == "étape 4"
        assert "vérifier pièce et outil" in [l.name for l in tree.leaves()]

    def test_task_tree_round_trip(self):
        tree = load_task_tree(FIXTURES / "ctt/step5.json")
        assert task_tree_from_dict(task_tree_to_dict(tree)) == tree

    def test_irvo_round_trip(self):
        model = load_irvo(FIXTURES / "irvo/config2.json")
        assert irvo_from_dict(irvo_to_dict(model)) == model

    def test_empty_document_is_parse_error(self, tmp_path):
        empty = tmp_path / "empty.json"
        empty.write_text("")
        with pytest.raises(ParseError):
            load_irvo(empty)
        with pytest.raises(ParseError):
            load_task_tree(empty)

    def test_parse_error_names_the_field_path(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"entities": [{"id": "U", "kind": "Ghost"}]}))
        with pytest.raises(ParseError, match=r"entities\[0\]\.kind"):
            load_irvo(bad)

    def test_needs_on_interior_node_rejected(self):
        doc = {
            "name": "root",
            "category": "Abstraction",
            "modality-needs": ["VisualOut"],
            "children": [{"name": "child", "category": "User"}],
        }
        with pytest.raises(ParseError, match="leaves"):
            task_tree_from_dict(doc)

    def test_operator_on_last_sibling_rejected(self):
        doc = {
            "name": "root",
            "category": "Abstraction",
            "children": [{"name": "only", "category": "User", "operator-to-next": "Enabling"}],
        }
        with pytest.raises(ParseError, match="last sibling"):
            task_tree_from_dict(doc)

    def test_devices_fixture_parses(self):
        devices = devices_from_dict(json.loads((FIXTURES / "devices/referential.json").read_text()))
        assert {d.device_id for d in devices} == {
            "hmd-opaque",
            "hmd-see-through-camera",
            "rfid-palm-reader",
            "data-glove",
            "headset-mic",
        }
