pub mod ddd;
pub mod instance;
pub mod mip;
pub mod postprocess;
pub mod refine;
pub mod timenet;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/feasibility.md")]
    mod feasibility {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/postprocessing.md")]
    mod postprocessing {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
