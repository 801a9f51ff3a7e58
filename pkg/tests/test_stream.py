import pytest
from hypothesis import given
from hypothesis import strategies as st

from snnsketch.stream import StreamParseError, StreamUpdate, format_stream, parse_stream, read_stream

updates = st.one_of(
    st.builds(StreamUpdate, st.sampled_from(["ins", "del", "count"]), st.integers(-10**6, 10**6)),
    st.builds(StreamUpdate, st.sampled_from(["distinct", "median"])),
)


def test_parse_all_forms():
    text = "# header\nins 5\n  del 3  # trailing\n\ncount 7\ndistinct\nmedian\n"
    got = parse_stream(text)
    assert [u.to_line() for u in got] == ["ins 5", "del 3", "count 7", "distinct", "median"]
    assert [u.is_query for u in got] == [False, False, True, True, True]


@pytest.mark.parametrize("text,lineno", [
    ("ins 1\nins x\n", 2),
    ("ins\n", 1),
    ("# c\n\nmedian 3\n", 3),
    ("insert 4\n", 1),
    ("count 1 2\n", 1),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(StreamParseError) as exc:
        parse_stream(text)
    assert exc.value.lineno == lineno
    assert str(exc.value).startswith(f"line {lineno}:")


def test_update_validation():
    with pytest.raises(ValueError):
        StreamUpdate("ins")
    with pytest.raises(ValueError):
        StreamUpdate("median", 3)
    with pytest.raises(ValueError):
        StreamUpdate("push", 1)


@given(st.lists(updates, max_size=40))
def test_round_trip(us):
    text = format_stream(us)
    assert parse_stream(text) == us
    assert format_stream(parse_stream(text)) == text


def test_read_stream(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("ins 2\nmedian\n")
    assert read_stream(p) == [StreamUpdate("ins", 2), StreamUpdate("median")]
