public class ResourceScheduler {
    public Resource getClusterResource() {
        return clusterResource;
    }
    public Resource getMinimumResourceCapability() {
        return minimumAllocation;
    }
    // consistent name: getMaximumResourceCapability
    public Resource getMaxValue() {
        return maximumAllocation;
    }
}
