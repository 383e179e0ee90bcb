import pytest

from waiterbot.furniture import Detection3D, FurnitureLayer
from waiterbot.layers import LayerFormatError, dump_layers, load_layers
from waiterbot.semantic import HumanLayer, HumanObservation, Zone


def populated_layers():
    furniture = FurnitureLayer()
    furniture.track_frame(
        [
            Detection3D("table", (1.0, 2.0, 0.36), (1.2, 0.8, 0.72), 0.1, 0),
            Detection3D("chair", (2.5, 2.0, 0.45), (0.5, 0.5, 0.9), -0.4, 0),
        ]
    )
    furniture.set_kitchen("table_0")
    zones = [Zone("dining area", (0.0, 0.0), (6.0, 4.0))]
    humans = HumanLayer()
    humans.upsert(HumanObservation((1.5, 1.5, 0.0), 0, action="sitting",
                                   attributes={"clothing": "T-shirt"}))
    return furniture, zones, humans


def test_dump_load_dump_byte_identical():
    furniture, zones, humans = populated_layers()
    text = dump_layers(furniture, zones, humans)
    again = dump_layers(*load_layers(text))
    assert again == text


def test_sections_present_and_ordered():
    furniture, zones, humans = populated_layers()
    text = dump_layers(furniture, zones, humans)
    assert text.index('"furniture"') < text.index('"zones"') < text.index('"humans"')
    assert '"kitchen": "table_0"' in text


def test_loaded_layer_preserves_ids_and_kitchen():
    furniture, zones, humans = populated_layers()
    loaded, loaded_zones, loaded_humans = load_layers(dump_layers(furniture, zones, humans))
    assert [i.id for i in loaded.instances()] == ["chair_0", "table_0"]
    assert loaded.kitchen_id == "table_0"
    assert loaded_zones[0].name == "dining area"
    assert loaded_humans.get("person_0").action == "sitting"


def test_loaded_human_counter_continues():
    furniture, zones, humans = populated_layers()
    _, _, loaded_humans = load_layers(dump_layers(furniture, zones, humans))
    new_id = loaded_humans.upsert(HumanObservation((9.0, 9.0, 0.0), 5))
    assert new_id == "person_1"


def test_not_json_raises():
    with pytest.raises(LayerFormatError):
        load_layers("this is not json")


def test_bad_entry_raises():
    with pytest.raises(LayerFormatError):
        load_layers('{"furniture": [{"id": "x"}]}')
