//! Core algorithms for linking reference strings to a scholarly corpus and
//! analyzing how the linked papers are consumed outside science.
//!
//! The crate is organized around a pipeline: [`corpus`] loads and filters the
//! input collections, [`refmatch`] resolves noisy reference strings against
//! the corpus, [`metrics`] turns resolved consumption into field-level
//! indices and hit rates, [`funding`] attributes grant money to fields, and
//! [`regress`] estimates the models relating consumption to funding.
//! [`fixture`] generates deterministic synthetic datasets for all of it.

pub mod corpus;
pub mod fixture;
pub mod funding;
pub mod metrics;
pub mod refmatch;
pub mod regress;

pub use corpus::{
    ConsumptionEvent, CorpusError, CorpusFilter, DocCategory, Domain, EventSet, FieldId,
    FieldTaxonomy, FunderClass, Grant, GrantId, GrantSet, Money, Paper, PaperId, PaperSet,
    ReferenceRecord,
};
pub use refmatch::{Bm25Params, Candidate, MatchDecision, MatchError, NullModel, SearchIndex};
