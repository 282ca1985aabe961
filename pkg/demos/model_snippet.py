"""
Building a provenance snippet by hand
=====================================

Five subject records: a user, an MPI rank, a program, a dataset-create
call, and the dataset it produced.  Run it to see the Turtle text and a
DOT rendering.
"""

from provio import (
    Predicate,
    ProvGraph,
    RenderSpec,
    SubClass,
    Triple,
    make_node,
    serialize_turtle,
    to_dot,
)

graph = ProvGraph()

# the agent chain: program ran on a rank, started by a user
bob = make_node(SubClass.USER, "Bob")
rank = make_node(SubClass.RANK, "MPI_rank_0")
program = make_node(SubClass.PROGRAM, "vpicio_un_h5.exe")

# one create call and the dataset it made
create = make_node(SubClass.CREATE, "H5Dcreate2", rank=0, seq=1)
dataset = make_node(SubClass.DATASET, "/Timestep_0/x")

for node in (bob, rank, program, create, dataset):
    graph.add_node(node)

graph.add_triple(Triple(program.guid, Predicate.ACTED_ON_BEHALF_OF, rank.guid))
graph.add_triple(Triple(rank.guid, Predicate.ACTED_ON_BEHALF_OF, bob.guid))
graph.add_triple(Triple(create.guid, Predicate.WAS_ASSOCIATED_WITH,
                        program.guid))
graph.add_triple(Triple(dataset.guid, Predicate.WAS_CREATED_BY, create.guid))
graph.add_triple(Triple(dataset.guid, Predicate.WAS_ATTRIBUTED_TO,
                        program.guid))

print(serialize_turtle(graph))

# highlight the dataset's creation path in the rendering
spec = RenderSpec(highlight_nodes={dataset.guid, create.guid})
print(to_dot(graph, spec))
