pub mod expr;
pub mod geometry;
pub mod mesh;
pub mod fem;
pub mod homogenize;
pub mod unfolding;
pub mod corrector;
pub mod cli;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/cells.md")]
    mod cells {}
    #[doc = include_str!("../../../book/src/unfolding.md")]
    mod unfolding {}
    #[doc = include_str!("../../../book/src/correctors.md")]
    mod correctors {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
