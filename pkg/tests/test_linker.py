import io
import random

from archive_census.extract import ParsedCount
from archive_census.identifiers import Family
from archive_census.linker import (
    CaptureObservation,
    link,
    lower_bound_channels,
    observation_from_json,
    read_census_csv,
    write_census_csv,
    write_observations_csv,
)

from helpers import bfs_partition, random_capture_graph

UCX = "UC" + "x" * 22
UCY = "UC" + "y" * 22


def obs(url, ts, channel_id=None, username=None, handle=None, subs=100):
    return CaptureObservation(
        url=url,
        timestamp=ts,
        subs=ParsedCount(subs, True),
        channel_id=channel_id,
        username=username,
        handle=handle,
    )


class TestTransitiveUnion:
    def test_username_handle_merge_through_id(self):
        captures = [
            obs("/user/smosh", "20080101000000"),
            obs("/user/smosh", "20130101000000", channel_id=UCX),
            obs("/@smosh", "20230101000000", channel_id=UCX),
        ]
        result = link(captures)
        assert len(result.entities) == 1
        entity = result.entities[0]
        assert entity.key == UCX
        families = {s.identifier.family for s in entity.identifiers}
        assert families == {Family.USERNAME, Family.CHANNEL_ID, Family.HANDLE}
        assert entity.capture_count == 3
        assert not result.conflicts

    def test_unlinked_username_stays_standalone(self):
        captures = [
            obs("/user/early1", "20070101000000"),
            obs("/user/early2", "20070201000000"),
            obs(f"/channel/{UCX}", "20150101000000"),
        ]
        result = link(captures)
        keys = {e.key for e in result.entities}
        assert keys == {"user:early1", "user:early2", UCX}

    def test_page_username_links_id_page(self):
        captures = [
            obs(f"/channel/{UCX}", "20150101000000", username="smosh"),
            obs("/user/smosh", "20080101000000"),
        ]
        result = link(captures)
        assert len(result.entities) == 1
        assert result.entities[0].key == UCX
        assert result.entities[0].capture_count == 2


class TestConflicts:
    def test_username_reassignment_splits(self):
        captures = [
            obs("/user/abc", "20130101000000", channel_id=UCX),
            obs("/user/abc", "20130601000000", channel_id=UCX),
            obs("/user/abc", "20150101000000", channel_id=UCY),
            obs("/user/abc", "20140101000000"),  # nearer UCX window
            obs("/user/abc", "20141201000000"),  # nearer UCY window
        ]
        result = link(captures)
        assert len(result.entities) == 2
        assert len(result.conflicts) == 1
        conflict = result.conflicts[0]
        assert conflict.identifier.value == "abc"
        assert [k for k, _ in conflict.claimed_keys] == [UCX, UCY]
        by_key = {e.key: e for e in result.entities}
        assert {c.timestamp for c in by_key[UCX].captures} == {
            "20130101000000",
            "20130601000000",
            "20140101000000",
        }
        assert {c.timestamp for c in by_key[UCY].captures} == {
            "20150101000000",
            "20141201000000",
        }

    def test_no_capture_lost_with_conflicts(self):
        rng = random.Random(3)
        captures = random_capture_graph(rng, 200, 40, allow_conflicts=True)
        distinct = {(c.url, c.timestamp) for c in captures}
        result = link(captures)
        assert sum(e.capture_count for e in result.entities) == len(distinct)
        assert result.dropped == 0


class TestLowerBound:
    def test_empty(self):
        assert lower_bound_channels([]) == 0

    def test_mixed(self):
        captures = [
            obs(f"/channel/UC{i:022d}", "20150101000000") for i in range(3)
        ] + [obs(f"/user/u{i}", "20080101000000") for i in range(2)]
        result = link(captures)
        assert lower_bound_channels(result.entities) == 3
        assert len(result.entities) == 5

    def test_106_ids_at_fixture_scale(self):
        captures = [
            obs(f"/channel/UC{i:022d}", "20190101000000") for i in range(106)
        ] + [obs(f"/user/solo{i}", "20070101000000") for i in range(20)]
        result = link(captures)
        assert lower_bound_channels(result.entities) == 106
        assert len(result.entities) >= 106

    def test_brute_force_components_with_ids(self):
        rng = random.Random(17)
        captures = random_capture_graph(rng, 300, 60)
        result = link(captures)
        oracle = bfs_partition(captures)
        with_id_oracle = sum(
            1 for comp in oracle if any(n.startswith("UC") for n in comp)
        )
        assert lower_bound_channels(result.entities) == with_id_oracle


def entity_partition(result):
    conflicted = {
        f"{c.identifier.family.group}:{c.identifier.value}" for c in result.conflicts
    }
    partition = set()
    for entity in result.entities:
        nodes = set()
        for span in entity.identifiers:
            ident = span.identifier
            node = (
                ident.value
                if ident.family is Family.CHANNEL_ID
                else f"{ident.family.group}:{ident.value}"
            )
            if node not in conflicted:
                nodes.add(node)
        if nodes:
            partition.add(frozenset(nodes))
    return partition


class TestPartitionOracle:
    def test_random_graphs_match_bfs(self):
        rng = random.Random(123)
        for _ in range(30):
            n_users = rng.randint(5, 200)
            n_ids = rng.randint(1, 50)
            captures = random_capture_graph(rng, n_users, n_ids)
            result = link(captures)
            assert not result.conflicts
            assert entity_partition(result) == bfs_partition(captures)

    def test_merge_order_independence(self):
        rng = random.Random(321)
        captures = random_capture_graph(rng, 120, 25, allow_conflicts=True)
        baseline = link(captures)
        base_keys = [e.key for e in baseline.entities]
        base_partition = entity_partition(baseline)
        for i in range(10):
            shuffled = captures[:]
            random.Random(i).shuffle(shuffled)
            again = link(shuffled)
            assert [e.key for e in again.entities] == base_keys
            assert entity_partition(again) == base_partition
            assert again.conflicts == baseline.conflicts


class TestSerialization:
    def test_census_csv_round_trip(self):
        captures = [
            obs("/user/smosh", "20080101000000", subs=5),
            obs("/user/smosh", "20130101000000", channel_id=UCX, subs=10),
            obs("/user/alone", "20070101000000", subs=1),
        ]
        result = link(captures)
        buf = io.StringIO()
        write_census_csv(result.entities, buf)
        rows = read_census_csv(io.StringIO(buf.getvalue()))
        assert [r.key for r in rows] == [UCX, "user:alone"]
        smosh = rows[0]
        assert smosh.capture_count == 2
        assert smosh.first_capture == "20080101000000"
        assert smosh.last_capture == "20130101000000"
        assert set(smosh.identifiers) == {f"channel_id:{UCX}", "username:smosh"}

    def test_observations_csv(self):
        captures = [
            obs("/user/a", "20080101000000", subs=7),
            obs("/user/a", "20090101000000", subs=9),
        ]
        result = link(captures)
        buf = io.StringIO()
        n = write_observations_csv(result.entities, buf)
        assert n == 2
        lines = buf.getvalue().splitlines()
        assert lines[0] == "key,timestamp,subs,exact,url"
        assert lines[1] == "user:a,20080101000000,7,1,/user/a"

    def test_observation_from_json(self):
        record = {
            "url": "/user/x",
            "timestamp": "20100101000000",
            "subs": 42,
            "subs_exact": False,
            "channel_id": UCX,
        }
        ob = observation_from_json(record)
        assert ob.subs == ParsedCount(42, False)
        assert ob.channel_id == UCX
