from .candidates import CandidateSet, PathCandidates, join_candidates, node_candidates, path_candidates
from .engine import QueryResult, QueryTrace, answer_query, enumerate_matches, join_order, run_query
from .graph import (PathDecomposition, QueryError, QueryGraph, QueryStats, compute_query_stats,
                    decompose_query, query_paths)
from .kpartite import KPartiteGraph, build_kpartite, joint_reduce, reduce_structure, reduce_upperbounds
