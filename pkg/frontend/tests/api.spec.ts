import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

import methodsFixture from "../fixtures/methods.json";
import itemFixture from "../fixtures/item_highmoor.json";

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("fetches the method list", async () => {
    const client = new ApiClient("", async (input) => {
      expect(input).toBe("/api/methods");
      return jsonResponse(methodsFixture);
    });
    expect(await client.methods()).toEqual(["noqr", "q2e", "query2doc", "eqr"]);
  });

  it("POSTs the recommend body with snake_case top_k", async () => {
    let seen: unknown;
    const client = new ApiClient("http://svc", async (input, init) => {
      expect(input).toBe("http://svc/api/recommend");
      expect(init?.method).toBe("POST");
      seen = JSON.parse(String(init?.body));
      return jsonResponse({ query: "q", method: "noqr", reformulation: {}, results: [] });
    });
    await client.recommend("q", "noqr", 12);
    expect(seen).toEqual({ query: "q", method: "noqr", top_k: 12 });
  });

  it("encodes item ids in the path", async () => {
    const client = new ApiClient("", async (input) => {
      expect(input).toBe("/api/items/odd%2Fid");
      return jsonResponse(itemFixture);
    });
    const item = await client.item("odd/id");
    expect(item.item_id).toBe("highmoor");
  });

  it("raises ApiError with status and detail on non-2xx", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse({ detail: "unknown method: bogus" }, 422),
    );
    await expect(client.recommend("q", "bogus", 5)).rejects.toMatchObject({
      status: 422,
      detail: "unknown method: bogus",
    });
    await expect(client.recommend("q", "bogus", 5)).rejects.toBeInstanceOf(ApiError);
  });

  it("keeps statusText when the error body is not JSON", async () => {
    const client = new ApiClient("", async () =>
      new Response("oops", { status: 500, statusText: "Internal Server Error" }),
    );
    await expect(client.methods()).rejects.toMatchObject({ status: 500 });
  });
});
