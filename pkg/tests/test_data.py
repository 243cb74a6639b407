import numpy as np
import pytest

from hybridmf.data import (InteractionEvent, SyntheticScale, generate_synthetic,
                           load_dataset, save_dataset)
from hybridmf.errors import IntegrityError, ParseError, SchemaError, ValidationError
from hybridmf.profiles import WeightTable, category_coverage


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def files(tmp_path):
    def make(events, posts="post_id,text\np1,hello\n"):
        return (write(tmp_path / "events.csv", events), write(tmp_path / "posts.csv", posts))
    return make


class TestLoadDataset:
    def test_minimal(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p1,direct_like,1,\n")
        ds = load_dataset(ev, po)
        assert ds.users == {"u1"}
        assert [p.post_id for p in ds.posts] == ["p1"]
        assert ds.events == (InteractionEvent("u1", "p1", "direct_like", 1.0, None),)

    def test_tab_separated(self, files):
        ev, po = files("user_id\tpost_id\tinteraction_type\tvalue\ttimestamp\nu1\tp1\tdirect_like\t2\t99\n")
        assert load_dataset(ev, po).events[0].timestamp == 99

    def test_dangling_post(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p9,direct_like,1,\n")
        with pytest.raises(IntegrityError, match="p9"):
            load_dataset(ev, po)

    def test_dangling_user(self, files, tmp_path):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu7,p1,direct_like,1,\n")
        users = write(tmp_path / "users.csv", "user_id\nu1\n")
        with pytest.raises(IntegrityError, match="u7"):
            load_dataset(ev, po, users)

    def test_negative_value(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p1,direct_like,-1,\n")
        with pytest.raises(ValidationError, match=":2:"):
            load_dataset(ev, po)

    def test_progress_above_one(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p1,reading_progress,1.5,\n")
        with pytest.raises(ValidationError):
            load_dataset(ev, po)

    def test_unknown_type_named(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p1,myspace_poke,1,\n")
        with pytest.raises(SchemaError, match="myspace_poke"):
            load_dataset(ev, po)

    def test_malformed_line_number(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\n"
                       "u1,p1,direct_like,1,\nu1,p1,direct_like\n")
        with pytest.raises(ParseError) as err:
            load_dataset(ev, po)
        assert err.value.line == 3

    def test_non_numeric_value(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p1,direct_like,lots,\n")
        with pytest.raises(ParseError, match="lots"):
            load_dataset(ev, po)

    def test_quoted_text_with_delimiter(self, files):
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\nu1,p1,direct_like,1,\n",
                       'post_id,text\np1,"hello, world"\n')
        assert load_dataset(ev, po).posts[0].text == "hello, world"

    def test_duplicate_events_kept(self, files):
        row = "u1,p1,direct_like,1,5\n"
        ev, po = files("user_id,post_id,interaction_type,value,timestamp\n" + row * 3)
        assert len(load_dataset(ev, po).events) == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.csv"):
            load_dataset(tmp_path / "nope.csv", tmp_path / "posts.csv")

    def test_round_trip(self, tiny_dataset, tmp_path):
        paths = save_dataset(tiny_dataset, tmp_path / "ds")
        again = load_dataset(paths["events"], paths["posts"], paths["users"])
        assert again == tiny_dataset


@pytest.fixture(scope="module")
def full_size():
    return generate_synthetic(42)


class TestSynthetic:
    def test_full_shape(self, full_size):
        assert len(full_size.users) == 250
        assert len(full_size.posts) == 6900

    def test_full_category_totals(self, full_size):
        cov = category_coverage(full_size, WeightTable.default())
        assert cov["direct"] == (20868, 150)
        assert cov["social"] == (28363, 165)
        assert cov["reading"] == (10985, 134)

    def test_every_user_has_events(self, full_size):
        assert {e.user_id for e in full_size.events} == full_size.users

    def test_deterministic_bytes(self, tmp_path):
        scale = SyntheticScale(n_users=30, n_posts=40, direct_events=90, direct_users=20,
                               social_events=60, social_users=15, reading_events=30, reading_users=10)
        a = save_dataset(generate_synthetic(7, scale), tmp_path / "a")
        b = save_dataset(generate_synthetic(7, scale), tmp_path / "b")
        for name in a:
            assert a[name].read_bytes() == b[name].read_bytes()
        c = save_dataset(generate_synthetic(8, scale), tmp_path / "c")
        assert a["events"].read_bytes() != c["events"].read_bytes()

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_small_scale_counts_exact(self, seed):
        scale = SyntheticScale(n_users=12, n_posts=9, direct_events=37, direct_users=5,
                               social_events=11, social_users=11, reading_events=4, reading_users=3,
                               n_topics=3)
        cov = category_coverage(generate_synthetic(seed, scale), WeightTable.default())
        assert cov == {"direct": (37, 5), "social": (11, 11), "reading": (4, 3)}

    @pytest.mark.parametrize("users,posts", [(0, 10), (10, 0)])
    def test_invalid_scale(self, users, posts):
        scale = SyntheticScale(n_users=users, n_posts=posts, direct_events=0, direct_users=0,
                               social_events=0, social_users=0, reading_events=0, reading_users=0)
        with pytest.raises(ValidationError):
            generate_synthetic(0, scale)

    def test_topic_signal_in_text(self):
        # same-topic posts share vocabulary far more than cross-topic ones
        from hybridmf.similarity import build_similarity, build_tfidf
        ds = generate_synthetic(3, SyntheticScale.structured())
        _, profiles = build_tfidf(list(ds.posts))
        dense = build_similarity(profiles, top_k=len(profiles), threshold=0.0).to_dense()
        np.fill_diagonal(dense, np.nan)
        top = np.nanmax(dense, axis=1)
        assert np.median(top) > 0.3
        assert np.nanmedian(dense) < 0.1
