//! Serves the design API on port 8080 with the model given as the first
//! argument; try `curl localhost:8080/health`.

use coldbend_service::{serve, Service};
use std::sync::Arc;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let model = std::env::args().nth(1);
    let svc = Arc::new(Service::new(model));
    serve("127.0.0.1:8080".parse()?, svc).await?;
    Ok(())
}
