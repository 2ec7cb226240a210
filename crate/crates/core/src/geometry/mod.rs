//! Minimal 2D geometry kernel with an interpreted command subset, its
//! topology graph, documentation retrieval, result verification, and a
//! runtime tool registry.

pub mod graph;
pub mod model;
pub mod registry;
pub mod retrieval;
pub mod templates;
pub mod tools;
pub mod verify;

pub use graph::{build_graph, parse_graph, serialize_graph, EdgeNode, GeoGraph, GraphError, NodeRef, SurfaceNode, VertexNode};
pub use model::{bbox_of, interpret_commands, Curve, GeoModel, InterpretError, QuadMesh, Surface};
pub use registry::{Invocation, RegistryError, ToolEntry, ToolRegistry};
pub use retrieval::{hybrid_retrieve, tokenize, DocChunk, Hit, HybridConfig, Index, RetrievalError};
pub use templates::{builtin_corpus, generate_script, Generated, TemplateError, TEMPLATES};
pub use tools::geometry_server;
pub use verify::{
    bbox_congruent, best_match_bijection, mapping_cost, preserves_adjacency, textual_similarity, Bijection, MeshGraph,
    VerifyError, EXACT_BIJECTION_LIMIT,
};
