"""Parser and serializer: canonical form, recovery, and round trips."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mao.dsl import (
    BpmnParseFailure,
    ParseErrorKind,
    escape_attr,
    extract_model_block,
    parse,
    parse_outcome,
    serialize,
)
from mao.model import Activity, Branch, Gateway, GatewayKind, ProcessModel

from helpers import random_model

DELIVERY = """<process name="shipping">
  <activity role="clerk" action="prepare to send a package" id="a1"/>
  <exclusiveGateway id="g1">
    <branch condition="courier pickup">
      <activity role="clerk" action="confirm the pickup location" id="a2"/>
      <activity role="system" action="assign a courier for pickup" id="a3"/>
    </branch>
    <branch condition="self delivery">
      <activity role="customer" action="go to the mailing point to send" object="package" id="a4"/>
    </branch>
  </exclusiveGateway>
</process>
"""


def codes(outcome):
    return [e.kind.code for e in outcome.errors]


def test_canonical_text_round_trips_byte_identical():
    assert serialize(parse(DELIVERY)) == DELIVERY


def test_attribute_order_is_normalized():
    text = '<process name="p">\n<activity id="a1" object="box" action="pack" role="clerk"/>\n</process>'
    out = serialize(parse(text))
    assert '<activity role="clerk" action="pack" object="box" id="a1"/>' in out


def test_object_omitted_when_absent():
    m = ProcessModel(name="p", nodes=(Activity(id="a1", role="r", action="go"),))
    assert 'object' not in serialize(m)


def test_empty_branch_serializes_on_one_line():
    m = ProcessModel(
        name="p",
        nodes=(
            Gateway(
                id="g1",
                kind=GatewayKind.EXCLUSIVE,
                branches=(
                    Branch(condition="a", children=(Activity(id="x", role="r", action="do"),)),
                    Branch(condition="b", children=()),
                ),
            ),
        ),
    )
    assert '    <branch condition="b"></branch>\n' in serialize(m)


def test_gateway_tags_map_to_kinds():
    for tag, kind in (
        ("exclusiveGateway", GatewayKind.EXCLUSIVE),
        ("parallelGateway", GatewayKind.PARALLEL),
        ("inclusiveGateway", GatewayKind.INCLUSIVE),
    ):
        cond = ' condition="c"' if kind is not GatewayKind.PARALLEL else ""
        text = (
            f'<process name="p"><{tag} id="g1">'
            f"<branch{cond}></branch><branch{cond}></branch>"
            f"</{tag}></process>"
        )
        m = parse(text)
        assert m.nodes[0].kind is kind


# -- escaping ----------------------------------------------------------------


def test_named_entities_decode():
    text = '<process name="a&amp;b &lt;x&gt; &quot;q&quot; &apos;t&apos;"></process>'
    assert parse(text).name == 'a&b <x> "q" \'t\''


def test_numeric_entities_decode():
    text = '<process name="&#65;&#x42;&#x6a;"></process>'
    assert parse(text).name == "ABj"


def test_escape_attr_minimal():
    assert escape_attr('a&b<c>d"e') == "a&amp;b&lt;c&gt;d&quot;e"
    assert escape_attr("it's") == "it's"  # apostrophe stays literal


def test_hostile_strings_survive_round_trip():
    m = ProcessModel(
        name='say "hi" & <wave>',
        nodes=(Activity(id="a1", role="r&d", action="a < b", object="x\ty"),),
    )
    again = parse(serialize(m))
    assert again == m


# -- parse errors ------------------------------------------------------------


def test_unknown_tag_strict_is_error():
    out = parse_outcome('<process name="p"><banana/></process>')
    assert "unexpected-tag" in codes(out)
    assert not out.ok


def test_unknown_tag_lenient_is_warning():
    out = parse_outcome('<process name="p"><banana/></process>', strict=False)
    assert out.ok
    assert [w.kind.code for w in out.warnings] == ["unexpected-tag"]
    assert out.model == ProcessModel(name="p")


def test_unknown_attribute():
    out = parse_outcome('<process name="p"><activity role="r" action="a" id="x" hue="red"/></process>')
    errs = [e for e in out.errors if e.kind is ParseErrorKind.UNKNOWN_ATTRIBUTE]
    assert errs and errs[0].detail == "hue"


def test_missing_required_attribute():
    out = parse_outcome('<process name="p"><activity role="r" id="x"/></process>')
    errs = [e for e in out.errors if e.kind is ParseErrorKind.MISSING_ATTRIBUTE]
    assert errs and errs[0].detail == "action"
    # recovery still yields the node with an empty action
    assert out.model.nodes[0].action == ""


def test_branch_outside_gateway_is_bad_nesting():
    out = parse_outcome('<process name="p"><branch condition="c"></branch></process>')
    errs = [e for e in out.errors if e.kind is ParseErrorKind.BAD_NESTING]
    assert errs and errs[0].detail == "branch"


def test_unclosed_tag():
    out = parse_outcome('<process name="p">\n  <exclusiveGateway id="g">\n')
    assert "unclosed-tag" in codes(out)


def test_not_well_formed_garbage():
    out = parse_outcome("this is not markup at all")
    assert not out.ok
    assert out.model is None


def test_error_spans_have_line_and_column():
    out = parse_outcome('<process name="p">\n  <banana/>\n</process>')
    err = out.errors[0]
    assert err.span.start_line == 2
    assert "line 2" in str(err.span)


def test_parse_raises_with_all_errors():
    with pytest.raises(BpmnParseFailure) as info:
        parse('<process name="p"><banana/><kiwi/></process>')
    assert len(info.value.errors) == 2


@pytest.mark.parametrize(
    "text",
    [
        "<!-- note --><process name=\"p\"></process>",
        "<?xml version=\"1.0\"?><process name=\"p\"></process>",
        "<process name=\"p\">stray words</process>",
        "<process name='p'></process>",  # single quotes
        '<process name="a & b"></process>',  # bare ampersand
    ],
)
def test_lenient_recoveries(text):
    out = parse_outcome(text, strict=False)
    assert out.ok, [str(e) for e in out.errors]
    assert out.model is not None
    assert out.warnings


def test_single_quoted_value_recovered():
    out = parse_outcome("<process name='p q'></process>", strict=False)
    assert out.model.name == "p q"


def test_duplicate_attribute_last_wins():
    out = parse_outcome('<process name="a" name="b"></process>', strict=False)
    assert out.model.name == "b"
    assert out.warnings or out.errors


# -- block extraction --------------------------------------------------------


def test_extract_block_from_prose():
    reply = "Sure thing.\n" + DELIVERY + "\nHope this helps!"
    block = extract_model_block(reply)
    assert block.startswith("<process")
    assert block.endswith("</process>")


def test_extract_block_takes_last_complete():
    reply = (
        '<process name="one"></process>\nwait, better:\n'
        '<process name="two"></process>'
    )
    assert 'name="two"' in extract_model_block(reply)


def test_extract_block_unclosed_tail():
    reply = 'preamble\n<process name="p">\n  <activity role="r" action="a" id="x"/>'
    block = extract_model_block(reply)
    assert block.startswith('<process name="p">')


def test_extract_block_none():
    assert extract_model_block("no model here") is None


# -- round-trip properties ---------------------------------------------------


def test_random_models_round_trip():
    rng = random.Random(1234)
    for _ in range(150):
        m = random_model(rng, hostile=True)
        text = serialize(m)
        assert parse(text) == m
        assert serialize(parse(text)) == text


@settings(max_examples=60, deadline=None)
@given(
    name=st.text(min_size=0, max_size=30),
    role=st.text(min_size=1, max_size=12),
    action=st.text(min_size=1, max_size=25),
)
def test_arbitrary_text_attrs_round_trip(name, action, role):
    m = ProcessModel(name=name, nodes=(Activity(id="a1", role=role, action=action),))
    text = serialize(m, check=False)
    assert parse(text) == m


def test_serialize_check_rejects_defective_model():
    bad = ProcessModel(
        name="p",
        nodes=(
            Gateway(id="g1", kind=GatewayKind.EXCLUSIVE, branches=(Branch(condition="c"),)),
        ),
    )
    with pytest.raises(ValueError):
        serialize(bad)
    assert "<exclusiveGateway" in serialize(bad, check=False)
