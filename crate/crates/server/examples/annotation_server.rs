//! Start the annotation service with a spill directory for idle sessions.
//!
//! cargo run -p lungseg-server --example annotation_server -- [port]
//!
//! then, for example:
//!   curl -X POST localhost:8080/api/sessions -H 'content-type: application/json' \
//!        -d '{"path": "/data/chest.nii.gz"}'
//!   curl -X POST localhost:8080/api/sessions/$ID/segment
//!   curl 'localhost:8080/api/sessions/$ID/slice?plane=coronal&index=200&overlay=true' -o slice.png

use std::net::SocketAddr;

use lungseg_server::{serve, ServiceConfig};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let port = std::env::args().nth(1).and_then(|p| p.parse().ok()).unwrap_or(8080);
    let spill = std::env::temp_dir().join("lungseg-sessions");
    std::fs::create_dir_all(&spill)?;
    let config = ServiceConfig {
        spill_dir: Some(spill),
        ..Default::default()
    };
    serve(SocketAddr::from(([127, 0, 0, 1], port)), config).await
}
