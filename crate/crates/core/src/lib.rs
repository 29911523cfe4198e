pub mod assets;
pub mod broker;
pub mod demo;
pub mod events;
pub mod genmod;
pub mod image;
pub mod mesh;
pub mod render;
pub mod scene;
pub mod splat;
